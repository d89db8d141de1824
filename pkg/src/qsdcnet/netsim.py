"""Star and loop networks of servers and users, and routing of one session.

The serving server (the one that prepares and Bell-measures) sits in the
receiver's branch. Every other server on the path between the receiver's
and the sender's branch only connects the quantum line, so it appears in
the transcript as a pass-through hop and nothing else.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

from .channel import ChannelLeg
from .errors import ConfigError, UnknownUserError
from .session import SessionConfig, SessionResult, run_session


@dataclass(frozen=True)
class Branch:
    server_id: str
    user_ids: tuple[str, ...]


@dataclass(frozen=True)
class Topology:
    kind: str
    branches: tuple[Branch, ...]

    def branch_of(self, user_id: str) -> int:
        for i, b in enumerate(self.branches):
            if user_id in b.user_ids:
                return i
        raise UnknownUserError(f"unknown user {user_id!r}")

    def to_dict(self) -> dict:
        return {"kind": self.kind,
                "branches": [{"server_id": b.server_id, "user_ids": list(b.user_ids)}
                             for b in self.branches]}


@dataclass(frozen=True)
class SessionRoute:
    sender_id: str
    receiver_id: str
    serving_server_id: str
    # receiver side first, i.e. the order S_B crosses them on its way to the sender
    relay_server_ids: tuple[str, ...]

    def hops(self) -> dict[ChannelLeg, list[str]]:
        relays = list(self.relay_server_ids)
        return {
            ChannelLeg.ALICE_TO_CHARLIE: [],
            ChannelLeg.CHARLIE_TO_BOB: relays,
            ChannelLeg.BOB_TO_ALICE: relays[::-1],
        }


def build_topology(spec: dict) -> Topology:
    """Validate ``{"kind": "star"|"loop", "branches": [{"server_id", "user_ids"}, ...]}``."""
    if not isinstance(spec, dict):
        raise ConfigError("topology must be an object with kind and branches")
    kind = spec.get("kind")
    if kind not in ("star", "loop"):
        raise ConfigError(f"topology.kind must be 'star' or 'loop', got {kind!r}")
    raw = spec.get("branches")
    if not isinstance(raw, list) or not all(isinstance(b, dict) for b in raw):
        raise ConfigError("topology.branches must be a list of {server_id, user_ids} objects")
    if not raw:
        raise ConfigError("topology.branches needs at least one server")
    branches, servers, users = [], set(), set()
    for b in raw:
        sid = b.get("server_id")
        if not isinstance(sid, str) or not sid:
            raise ConfigError("every branch needs a server_id")
        if sid in servers:
            raise ConfigError(f"duplicate server id {sid!r}")
        servers.add(sid)
        uids = b.get("user_ids", [])
        if not isinstance(uids, list) or not all(isinstance(u, str) for u in uids):
            raise ConfigError(f"user_ids of {sid!r} must be a list of strings")
        uids = tuple(uids)
        for u in uids:
            if u in users or u in servers:
                raise ConfigError(f"user {u!r} appears in more than one branch")
            users.add(u)
        branches.append(Branch(sid, uids))
    return Topology(kind, tuple(branches))


def _path(topology: Topology, src: int, dst: int) -> list[int]:
    """Branch indices from ``src`` to ``dst`` inclusive."""
    if src == dst:
        return [src]
    if topology.kind == "star":
        # branches meet at a passive hub
        return [src, dst]
    n = len(topology.branches)
    up = [(src + k) % n for k in range((dst - src) % n + 1)]
    down = [(src - k) % n for k in range((src - dst) % n + 1)]
    if len(up) != len(down):
        return up if len(up) < len(down) else down
    ids = lambda p: [topology.branches[i].server_id for i in p]  # noqa: E731
    return up if ids(up) <= ids(down) else down


def route_session(topology: Topology, sender_id: str, receiver_id: str) -> SessionRoute:
    if sender_id == receiver_id:
        raise ConfigError("sender and receiver must differ")
    s = topology.branch_of(sender_id)
    r = topology.branch_of(receiver_id)
    path = _path(topology, r, s)
    serving = topology.branches[r].server_id
    relays = tuple(topology.branches[i].server_id for i in path[1:])
    return SessionRoute(sender_id, receiver_id, serving, relays)


def run_network_session(topology: Topology, route: SessionRoute,
                        config: SessionConfig, message=None) -> SessionResult:
    """Run the subsystem protocol for ``route`` with the serving server as Alice."""
    known = {b.server_id for b in topology.branches}
    if route.serving_server_id not in known or not set(route.relay_server_ids) <= known:
        raise ConfigError("route does not belong to this topology")
    eve_hop = getattr(config.eve, "hop", None)
    if eve_hop is not None and eve_hop not in route.relay_server_ids:
        raise ConfigError(f"eve hop {eve_hop!r} is not a relay on this route")
    return run_session(replace(config), message=message, hops=route.hops())
