import pytest

from gentools import small_config

from ivotesim.auditlog import AuditLogs
from ivotesim.components import (
    CLIENT,
    LS,
    VA,
    VCS,
    VFS,
    VSS,
    LogServer,
    Network,
    ValidityConfirmationServer,
    VerificationApp,
    VoteCountingApp,
    VoteForwardingServer,
    VoteStorageServer,
    VotingClient,
)
from ivotesim.rng import DeterministicRng
from ivotesim.scenario import Scenario
from ivotesim.simulation import provision


class ProtocolFixture:
    """All seven components wired the way the harness wires them, for tests
    that drive the protocol directly."""

    def __init__(self, cfg, seed=1, period_end=86400, threshold=(3, 2), provisioning=None):
        self.cfg = cfg
        self.period_end = period_end
        sc = Scenario(
            config=cfg,
            period_end=period_end,
            seed=seed,
            threshold_n=threshold[0],
            threshold_k=threshold[1],
            provisioning=provisioning or {},
        )
        self.rng = DeterministicRng(seed)
        self.material = provision(cfg, sc, self.rng)
        self.network = Network()
        self.log_server = LogServer()
        self.vcs = ValidityConfirmationServer(self.material.vcs_state)
        self.vfs = VoteForwardingServer(cfg, self.network)
        self.logs = AuditLogs()
        self.vss = VoteStorageServer(
            cfg, self.material.certificates, self.logs, self.network, self.rng, period_end
        )
        self.client = VotingClient(
            self.material.election_keys.public_key,
            self.material.signing_keys,
            self.material.cert_ids,
            self.network,
            self.rng,
        )
        self.va = VerificationApp(self.material.election_keys.public_key, self.network)
        for name, component in (
            (CLIENT, self.client), (VA, self.va), (VFS, self.vfs),
            (LS, self.log_server), (VSS, self.vss), (VCS, self.vcs),
        ):
            self.network.register(name, component)
        for a, b in ((CLIENT, VFS), (VA, VFS), (VFS, VSS), (VFS, LS), (VSS, LS), (VSS, VCS)):
            self.network.connect(a, b)

    def vca(self) -> VoteCountingApp:
        return VoteCountingApp(self.cfg, self.logs)

    def shares(self, *indices):
        return [self.material.shares[i - 1] for i in indices]


@pytest.fixture
def protocol():
    def build(cfg=None, **kwargs):
        return ProtocolFixture(cfg or small_config(), **kwargs)

    return build
