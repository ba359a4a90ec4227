"""Non-commutative !-tensors: syntax, !-box operations, equational reasoning, models."""

from .terms import (
    Atom, BangBox, Circle, DirEdge, Group, IdWire, IllFormed, In, Out, Signature, Tensor,
    Violation, c3_witness, contexts, free_edges, product, rename_free, validate, violations,
)
from .syntax import ParseError, export_dot, export_json, import_json, parse, parse_tensor, parse_theory, print_tensor
from .canon import canonical_form, canonical_string, equiv, equiv_upto_renaming
from .boxops import (
    OpError, OpStep, apply_ops, copy, drop, enumerate_instances, expand, kill, normalize_ops, weaken,
)
from .calculus import (
    BoundaryMismatch, Equation, MatchCert, Theory, check_equation, derive_box, derive_prod,
    derive_rename, derive_weaken, eq_op, find_matches, load_theory, rewrite,
)
from .proofs import check_induction, parse_proof_script, run_proof_script
from .model import EvalResult, Model, check_rule_in_model, evaluate, load_model, naive_contract

__all__ = [n for n in dir() if not n.startswith("_")]
