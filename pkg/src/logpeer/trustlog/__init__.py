from .engine import (DEFAULT_MAX_DEPTH, BuiltinError, DepthExceeded, LogicContext, QueryError,
                     prove, query, solutions)
from .syntax import (LogicSyntaxError, format_statement, format_term, instantiate, parse_goal,
                     parse_program, parse_statement)
from .terms import Atom, ListPattern, Literal, Statement, Var
from .certs import (Certificate, CertStore, Ed25519Scheme, InvalidCertificate, MockScheme, Principal,
                    ResolveError, Token, issue_certificate, pid_of, resolve_context)
