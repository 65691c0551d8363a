"""Control-plane messages exchanged between NSP controllers and customers.

Field names follow the controller API table; certificate arguments are tokens
into the shared store.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .aqt import Prefix
from .trustlog.certs import Token


@dataclass(frozen=True)
class Message:
    sender: str


@dataclass(frozen=True)
class StitchRequest(Message):
    slice_id: str = ""
    sliver_id: str = ""
    secret: str = ""
    properties: tuple = ()

    def prop(self, key, default=None):
        return dict(self.properties).get(key, default)


@dataclass(frozen=True)
class UndoStitch(Message):
    slice_id: str = ""
    sliver_id: str = ""


@dataclass(frozen=True)
class StitchportRequest(Message):
    stitchport_url: str = ""
    vlan: int = 0
    properties: tuple = ()


@dataclass(frozen=True)
class AdvertiseRoute(Message):
    route: tuple = ()          # (dst prefix, path)
    route_cert: Token = b""


@dataclass(frozen=True)
class AdvertisePolicy(Message):
    src: Prefix = None
    dst: Prefix = None
    policy_cert: Token = b""


@dataclass(frozen=True)
class RequestFlow(Message):
    src: str = ""
    dst: str = ""


@dataclass(frozen=True)
class WithdrawRoute(Message):
    route: tuple = ()


@dataclass(frozen=True)
class SelectionNotice(Message):
    """The sender's flow regions that forward to the receiver (``True``) and
    the higher-priority regions that shadow parts of them (``False``)."""

    entries: tuple = ()        # ((Region, bool), ...)


@dataclass(frozen=True)
class Ack:
    ok: bool
    reason: str = ""
    detail: str = field(default="", compare=False)


OK = Ack(True)
