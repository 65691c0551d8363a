"""Signed certificates, content-hash tokens, the certificate store, and
context resolution over linked certificate DAGs."""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass, field
from typing import Iterable

from ..aqt import Prefix
from .engine import LogicContext
from .terms import Atom, ListPattern, Literal, Statement, Var, is_ground

INFINITE = None


class Token(bytes):
    """Content hash naming a signed certificate."""

    def __repr__(self) -> str:
        return f"Token({self.hex()[:12]})"

    def short(self) -> str:
        return self.hex()[:12]


# -- signature schemes ------------------------------------------------------

class Ed25519Scheme:
    name = "ed25519"

    def keypair(self, seed: bytes):
        from cryptography.hazmat.primitives.asymmetric.ed25519 import Ed25519PrivateKey
        from cryptography.hazmat.primitives.serialization import Encoding, PublicFormat

        sk = Ed25519PrivateKey.from_private_bytes(hashlib.sha256(seed).digest())
        pk = sk.public_key().public_bytes(Encoding.Raw, PublicFormat.Raw)
        return sk, pk

    def sign(self, private, message: bytes) -> bytes:
        return private.sign(message)

    def verify(self, public: bytes, message: bytes, signature: bytes) -> bool:
        from cryptography.exceptions import InvalidSignature
        from cryptography.hazmat.primitives.asymmetric.ed25519 import Ed25519PublicKey

        try:
            Ed25519PublicKey.from_public_bytes(public).verify(signature, message)
        except (InvalidSignature, ValueError):
            return False
        return True


class MockScheme:
    """Keyed-hash stand-in for fast deterministic tests.  Not unforgeable:
    the verification key is also the signing key."""

    name = "mock"

    def keypair(self, seed: bytes):
        key = hashlib.sha256(b"mock" + seed).digest()
        return key, key

    def sign(self, private, message: bytes) -> bytes:
        return hashlib.sha256(private + message).digest()

    def verify(self, public: bytes, message: bytes, signature: bytes) -> bool:
        return hashlib.sha256(public + message).digest() == signature


SCHEMES = {s.name: s for s in (Ed25519Scheme(), MockScheme())}


@dataclass(frozen=True, eq=False)
class Principal:
    pid: str
    public_key: bytes
    scheme: object
    name: str = ""
    private_key: object = field(default=None, repr=False)

    @classmethod
    def generate(cls, name: str, seed: bytes | str = b"", scheme=None) -> "Principal":
        """Deterministic keypair derived from ``seed`` and ``name``."""
        scheme = scheme or SCHEMES["ed25519"]
        if isinstance(seed, str):
            seed = seed.encode()
        private, public = scheme.keypair(seed + b"/" + name.encode())
        return cls(pid_of(public), public, scheme, name, private)

    def public(self) -> "Principal":
        return Principal(self.pid, self.public_key, self.scheme, self.name)

    def sign(self, message: bytes) -> bytes:
        if self.private_key is None:
            raise PermissionError(f"no private key for {self.name or self.pid[:12]}")
        return self.scheme.sign(self.private_key, message)


def pid_of(public_key: bytes) -> str:
    return hashlib.sha256(public_key).hexdigest()


# -- canonical encoding -----------------------------------------------------

def _u32(n: int) -> bytes:
    return struct.pack(">I", n)


def _blob(b: bytes) -> bytes:
    return _u32(len(b)) + b


def encode_term(t) -> bytes:
    if t is None:
        return b"n"
    if isinstance(t, Var):
        return b"v" + _blob(t.name.encode())
    if isinstance(t, ListPattern):
        return b"L" + encode_term(tuple(t.items)) + encode_term(t.tail)
    if isinstance(t, tuple):
        return b"l" + _u32(len(t)) + b"".join(encode_term(x) for x in t)
    if isinstance(t, Prefix):
        return b"p" + struct.pack(">IB", t.bits, t.length)
    if isinstance(t, bool):
        raise TypeError("booleans are not terms")
    if isinstance(t, int):
        return b"i" + struct.pack(">q", t)
    if isinstance(t, str):
        return b"s" + _blob(t.encode())
    raise TypeError(f"cannot encode {t!r}")


def _encode_atom(a: Atom) -> bytes:
    return _blob(a.pred.encode()) + encode_term(tuple(a.args))


def encode_statement(st: Statement) -> bytes:
    out = [_encode_atom(st.head), _u32(len(st.body))]
    for lit in st.body:
        out.append(encode_term(lit.speaker))
        out.append(_encode_atom(lit.atom))
    return b"".join(out)


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise ValueError("truncated")
        b = self.data[self.pos:self.pos + n]
        self.pos += n
        return b

    def u32(self) -> int:
        return struct.unpack(">I", self.take(4))[0]

    def blob(self) -> bytes:
        return self.take(self.u32())

    def term(self):
        tag = self.take(1)
        if tag == b"n":
            return None
        if tag == b"v":
            return Var(self.blob().decode())
        if tag == b"L":
            items = self.term()
            return ListPattern(items, self.term())
        if tag == b"l":
            return tuple(self.term() for _ in range(self.u32()))
        if tag == b"p":
            bits, length = struct.unpack(">IB", self.take(5))
            return Prefix(bits, length)
        if tag == b"i":
            return struct.unpack(">q", self.take(8))[0]
        if tag == b"s":
            return self.blob().decode()
        raise ValueError(f"bad term tag {tag!r}")

    def atom(self) -> Atom:
        pred = self.blob().decode()
        args = self.term()
        if not isinstance(args, tuple):
            raise ValueError("atom arguments must be a list")
        return Atom(pred, args)

    def statement(self, speaker) -> Statement:
        head = self.atom()
        body = []
        for _ in range(self.u32()):
            sp = self.term()
            body.append(Literal(self.atom(), sp))
        return Statement(speaker, head, tuple(body))


@dataclass(frozen=True)
class Certificate:
    issuer: str
    payload: tuple
    links: tuple = ()
    label: str | None = None
    issued_at: int = 0
    ttl: int | None = INFINITE
    scheme: str = "ed25519"
    signature: bytes = b""

    def body_bytes(self) -> bytes:
        out = [b"LPC1", _blob(self.issuer.encode()), _blob(self.scheme.encode()),
               _u32(len(self.payload))]
        out.extend(_blob(encode_statement(s)) for s in self.payload)
        out.append(_u32(len(self.links)))
        out.extend(_blob(bytes(t)) for t in self.links)
        out.append(encode_term(self.label))
        out.append(struct.pack(">q", self.issued_at))
        out.append(struct.pack(">q", -1 if self.ttl is None else self.ttl))
        return b"".join(out)

    def encode(self) -> bytes:
        return self.body_bytes() + _blob(self.signature)

    @property
    def token(self) -> Token:
        return token_of(self.encode())

    def expired(self, now: int) -> bool:
        return self.ttl is not None and now >= self.issued_at + self.ttl

    def statements(self) -> list[Statement]:
        return [s.with_speaker(self.issuer) for s in self.payload]


def token_of(blob: bytes) -> Token:
    return Token(hashlib.sha256(blob).digest())


def decode_certificate(blob: bytes) -> Certificate:
    r = _Reader(blob)
    if r.take(4) != b"LPC1":
        raise ValueError("bad magic")
    issuer = r.blob().decode()
    scheme = r.blob().decode()
    payload = tuple(_Reader(r.blob()).statement(None) for _ in range(r.u32()))
    links = tuple(Token(r.blob()) for _ in range(r.u32()))
    label = r.term()
    issued_at = struct.unpack(">q", r.take(8))[0]
    ttl = struct.unpack(">q", r.take(8))[0]
    signature = r.blob()
    if r.pos != len(blob):
        raise ValueError("trailing bytes")
    return Certificate(issuer, payload, links, label, issued_at, None if ttl < 0 else ttl,
                       scheme, signature)


# -- store ------------------------------------------------------------------

class CertStore:
    """In-process certificate repository: token -> encoded bytes, self-certifying
    labels, and registered public keys."""

    def __init__(self):
        self.blobs: dict[Token, bytes] = {}
        self.labels: dict[tuple[str, str], Token] = {}
        self.keys: dict[str, tuple[str, bytes]] = {}
        self._verified: dict[Token, tuple[bytes, Certificate]] = {}

    def __len__(self) -> int:
        return len(self.blobs)

    def __contains__(self, token) -> bool:
        return token in self.blobs

    def register(self, principal: Principal) -> None:
        self.keys[principal.pid] = (principal.scheme.name, principal.public_key)

    def put(self, cert: Certificate) -> Token:
        blob = cert.encode()
        token = token_of(blob)
        self.blobs[token] = blob
        if cert.label is not None:
            self.labels[(cert.issuer, cert.label)] = token
        return token

    def get(self, token: Token) -> Certificate:
        return decode_certificate(self.blobs[token])

    def lookup(self, pid: str, label: str) -> Token | None:
        return self.labels.get((pid, label))

    def verified(self, token: Token) -> Certificate:
        """Decode and check hash and signature; raises ``InvalidCertificate``."""
        blob = self.blobs.get(token)
        if blob is None:
            raise InvalidCertificate(token, "missing")
        hit = self._verified.get(token)
        if hit is not None and hit[0] == blob:
            return hit[1]
        if token_of(blob) != token:
            raise InvalidCertificate(token, "hash mismatch")
        try:
            cert = decode_certificate(blob)
        except (ValueError, UnicodeDecodeError, struct.error) as exc:
            raise InvalidCertificate(token, f"malformed: {exc}") from None
        key = self.keys.get(cert.issuer)
        if key is None:
            raise InvalidCertificate(token, "unknown issuer key")
        scheme_name, public = key
        if scheme_name != cert.scheme or pid_of(public) != cert.issuer:
            raise InvalidCertificate(token, "issuer key mismatch")
        if not SCHEMES[scheme_name].verify(public, cert.body_bytes(), cert.signature):
            raise InvalidCertificate(token, "bad signature")
        self._verified[token] = (blob, cert)
        return cert


class InvalidCertificate(Exception):
    def __init__(self, token, reason: str):
        super().__init__(f"{token!r}: {reason}")
        self.token = token
        self.reason = reason


@dataclass(frozen=True)
class ResolveError:
    token: Token
    reason: str


def issue_certificate(store: CertStore, issuer: Principal, payload: Iterable[Statement],
                      links: Iterable[Token] = (), label: str | None = None,
                      ttl: int | None = INFINITE, now: int = 0,
                      allow_dangling: bool = False) -> tuple[Certificate, Token]:
    if issuer.private_key is None:
        raise PermissionError(f"issuer {issuer.name or issuer.pid[:12]} has no private key")
    stmts = []
    for st in payload:
        if st.is_fact and not all(is_ground(a) for a in st.head.args):
            raise ValueError(f"fact {st.head.pred} has free variables")
        stmts.append(Statement(None, st.head, st.body))
    links = tuple(Token(t) for t in links)
    if not allow_dangling:
        missing = [t for t in links if t not in store]
        if missing:
            raise KeyError(f"dangling links: {missing}")
    store.register(issuer)
    unsigned = Certificate(issuer.pid, tuple(stmts), links, label, now, ttl, issuer.scheme.name)
    signature = issuer.sign(unsigned.body_bytes())
    cert = Certificate(issuer.pid, tuple(stmts), links, label, now, ttl, issuer.scheme.name, signature)
    token = store.put(cert)
    return cert, token


def resolve_context(store: CertStore, roots: Iterable[Token], local: Iterable[Statement] = (),
                    now: int = 0, local_speaker: str | None = None) -> LogicContext:
    """Collect statements from every valid certificate reachable from ``roots``.

    Invalid or expired certificates are skipped along with whatever is reachable
    only through them.  Links that close a cycle are dropped and reported.
    """
    certs: dict[Token, Certificate] = {}
    errors: list[ResolveError] = []
    done: set = set()
    for root in roots:
        root = Token(root)
        if root in done:
            continue
        # iterative DFS with an explicit on-path set for cycle detection
        stack = [(root, None)]
        on_path: set = set()
        while stack:
            token, it = stack[-1]
            if it is None:
                if token in done:
                    stack.pop()
                    continue
                try:
                    cert = store.verified(token)
                except InvalidCertificate as exc:
                    errors.append(ResolveError(token, exc.reason))
                    done.add(token)
                    stack.pop()
                    continue
                if cert.expired(now):
                    errors.append(ResolveError(token, "expired"))
                    done.add(token)
                    stack.pop()
                    continue
                certs[token] = cert
                on_path.add(token)
                it = iter(cert.links)
                stack[-1] = (token, it)
            nxt = next(it, None)
            if nxt is None:
                on_path.discard(token)
                done.add(token)
                stack.pop()
            elif nxt in on_path:
                errors.append(ResolveError(nxt, "cycle"))
            elif nxt not in done:
                stack.append((nxt, None))
    stmts: list[Statement] = []
    for cert in certs.values():
        stmts.extend(cert.statements())
    speaker = local_speaker or "local"
    stmts.extend(s.with_speaker(speaker) for s in local)
    return LogicContext(stmts, certs, errors, local_speaker=speaker)
