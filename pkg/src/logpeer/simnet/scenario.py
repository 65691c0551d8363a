"""Declarative scenario description and JSON loader."""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field, fields
from importlib import resources
from pathlib import Path

from ..aqt import WILDCARD, Prefix

KINDS = ("root", "authority", "nsp", "sdx", "subnet")
POLICY_KINDS = ("inbound", "outbound", "connectivity")
SCENARIO_ENV = "LOGPEER_SCENARIOS"


class ScenarioError(ValueError):
    pass


@dataclass
class PrincipalSpec:
    name: str
    kind: str
    prefix: str | None = None        # subnets only
    sdx: str | None = None           # subnets only: the attaching edge provider
    attach_step: int = 1
    advertise_step: int | None = None

    @property
    def advertise_at(self) -> int:
        return self.attach_step if self.advertise_step is None else self.advertise_step


@dataclass
class TagSpec:
    name: str
    root: str


@dataclass
class EndorsementSpec:
    tag: str
    subject: str
    issuer: str | None = None        # defaults to the tag root
    delegate: bool = False


@dataclass
class PrefixSpec:
    issuer: str
    holder: str
    prefix: str


@dataclass
class LinkSpec:
    a: str
    b: str
    step: int = 1
    down: int | None = None


@dataclass
class PolicySpec:
    owner: str
    kind: str
    src: str = "*"
    dst: str = "*"
    tags: list = field(default_factory=list)
    pids: list = field(default_factory=list)   # connectivity: admitted principals by name
    step: int = 0


@dataclass
class FlowSpec:
    a: str
    b: str
    step: int = 1


@dataclass
class PacketSpec:
    src: str
    dst: str
    step: int = 1
    count: int = 1


@dataclass
class Scenario:
    name: str
    principals: list = field(default_factory=list)
    tags: list = field(default_factory=list)
    endorsements: list = field(default_factory=list)
    prefixes: list = field(default_factory=list)
    links: list = field(default_factory=list)
    policies: list = field(default_factory=list)
    flows: list = field(default_factory=list)
    packets: list = field(default_factory=list)
    steps: int = 1
    trust_roots: list = field(default_factory=list)
    key_seed: str = ""
    tag_depth: int = 3
    scheme: str = "ed25519"
    message_budget: int = 200_000

    def principal(self, name: str) -> PrincipalSpec:
        for p in self.principals:
            if p.name == name:
                return p
        raise ScenarioError(f"unknown principal {name!r}")

    def of_kind(self, *kinds) -> list:
        return [p for p in self.principals if p.kind in kinds]

    def resolve_prefix(self, text: str) -> Prefix:
        """``*``, a literal prefix, or a subnet name."""
        if text in ("*", None):
            return WILDCARD
        for p in self.principals:
            if p.name == text:
                if p.prefix is None:
                    raise ScenarioError(f"{text!r} has no prefix")
                return Prefix.parse(p.prefix)
        return Prefix.parse(text)

    def validate(self) -> "Scenario":
        names = [p.name for p in self.principals]
        if len(set(names)) != len(names):
            raise ScenarioError("duplicate principal names")
        known = set(names)
        for p in self.principals:
            if p.kind not in KINDS:
                raise ScenarioError(f"{p.name}: unknown kind {p.kind!r}")
            if p.kind == "subnet":
                if p.prefix is None or p.sdx is None:
                    raise ScenarioError(f"subnet {p.name} needs prefix and sdx")
                if p.sdx not in known or self.principal(p.sdx).kind not in ("sdx", "nsp"):
                    raise ScenarioError(f"subnet {p.name}: unknown provider {p.sdx!r}")
        subnets = self.of_kind("subnet")
        for i, a in enumerate(subnets):
            pa = Prefix.parse(a.prefix)
            for b in subnets[i + 1:]:
                if pa.overlaps(Prefix.parse(b.prefix)):
                    raise ScenarioError(f"subnet prefixes overlap: {a.name} {b.name}")
        tag_names = {t.name for t in self.tags}
        for t in self.tags:
            if t.root not in known:
                raise ScenarioError(f"tag {t.name}: unknown root {t.root!r}")
        for e in self.endorsements:
            if e.tag not in tag_names:
                raise ScenarioError(f"endorsement of unknown tag {e.tag!r}")
            for who in (e.subject, e.issuer):
                if who is not None and who not in known:
                    raise ScenarioError(f"endorsement names unknown principal {who!r}")
        for d in self.prefixes:
            for who in (d.issuer, d.holder):
                if who not in known:
                    raise ScenarioError(f"prefix delegation names unknown principal {who!r}")
            Prefix.parse(d.prefix)
        for r in self.trust_roots:
            if r not in known:
                raise ScenarioError(f"unknown trust root {r!r}")
        for l in self.links:
            for who in (l.a, l.b):
                if who not in known:
                    raise ScenarioError(f"link names unknown principal {who!r}")
        for pol in self.policies:
            if pol.kind not in POLICY_KINDS:
                raise ScenarioError(f"unknown policy kind {pol.kind!r}")
            if pol.owner not in known:
                raise ScenarioError(f"policy owner {pol.owner!r} unknown")
            for t in pol.tags:
                if t != "any" and t not in tag_names:
                    raise ScenarioError(f"policy uses unknown tag {t!r}")
            for who in pol.pids:
                if who not in known:
                    raise ScenarioError(f"policy admits unknown principal {who!r}")
            if pol.kind != "connectivity":
                if not pol.tags:
                    raise ScenarioError(f"{pol.owner}: path policy without tags")
                self.resolve_prefix(pol.src)
                self.resolve_prefix(pol.dst)
        for f in self.flows:
            for who in (f.a, f.b):
                if who not in known:
                    raise ScenarioError(f"flow names unknown principal {who!r}")
        last = max([l.step for l in self.links] + [l.down or 0 for l in self.links]
                   + [p.attach_step for p in subnets] + [p.advertise_at for p in subnets]
                   + [p.step for p in self.policies] + [f.step for f in self.flows]
                   + [p.step for p in self.packets] + [0])
        if last > self.steps:
            raise ScenarioError(f"events scheduled at step {last} beyond steps={self.steps}")
        return self


_SECTIONS = {
    "principals": PrincipalSpec,
    "tags": TagSpec,
    "endorsements": EndorsementSpec,
    "prefixes": PrefixSpec,
    "links": LinkSpec,
    "policies": PolicySpec,
    "flows": FlowSpec,
    "packets": PacketSpec,
}


def _build(cls, item, where: str):
    allowed = {f.name for f in fields(cls)}
    extra = set(item) - allowed
    if extra:
        raise ScenarioError(f"{where}: unexpected keys {sorted(extra)}")
    try:
        return cls(**item)
    except TypeError as e:
        raise ScenarioError(f"{where}: {e}") from None


def scenario_from_dict(data: dict, name: str = "scenario") -> Scenario:
    if not isinstance(data, dict):
        raise ScenarioError("scenario must be a JSON object")
    kwargs = {"name": data.get("name", name)}
    for key, value in data.items():
        if key == "name":
            continue
        if key in _SECTIONS:
            kwargs[key] = [_build(_SECTIONS[key], item, f"{key}[{i}]") for i, item in enumerate(value)]
        elif key in {f.name for f in fields(Scenario)}:
            kwargs[key] = value
        else:
            raise ScenarioError(f"unknown top-level key {key!r}")
    return Scenario(**kwargs).validate()


def bundled_names() -> list[str]:
    return sorted(p.name[:-5] for p in resources.files(__package__).joinpath("scenarios").iterdir()
                  if p.name.endswith(".json"))


def find_scenario(ref: str) -> Path | None:
    """A path, or a name looked up in $LOGPEER_SCENARIOS then the bundled set."""
    p = Path(ref)
    if p.suffix == ".json" and p.exists():
        return p
    env = os.environ.get(SCENARIO_ENV)
    if env:
        cand = Path(env) / f"{ref}.json"
        if cand.exists():
            return cand
    bundled = resources.files(__package__).joinpath("scenarios", f"{ref}.json")
    if bundled.is_file():
        return Path(str(bundled))
    return None


def load_scenario(ref: str) -> Scenario:
    path = find_scenario(ref)
    if path is None:
        raise FileNotFoundError(f"no scenario named {ref!r}")
    text = path.read_text()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ScenarioError(f"{path}:{e.lineno}:{e.colno}: {e.msg}") from None
    return scenario_from_dict(data, path.stem)
