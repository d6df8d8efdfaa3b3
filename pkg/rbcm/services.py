"""Used by the CLI or any UI to deliver services to our users
"""
from dataclasses import dataclass
from functools import wraps
import logging

from rbcm.analysis import ncm_emptiness, ncm_membership_exact, ncm_witness
from rbcm.closures import (
    ComponentUnion,
    HybridDecider,
    as_family,
    dcm1_right_quotient,
    dcm11_left_quotient,
    dcm11_normalize,
    dcm11_suffix_infix,
    dcm11_two_sided_quotient,
    dcm_boolean,
    dcm_left_quotient_finite,
    dcm_prefix,
    dcm_right_quotient_general,
    epsilon,
    ncm_quotient,
    ncm_word_ops,
    nothing,
    regular_quotient_by_family,
    sigma_star,
)
from rbcm.gallery import CATALOG, build_named, demo_nonclosure
from rbcm.machines import (
    Caps,
    FiniteAutomaton,
    automaton_words,
    canonical,
    enumerate_language,
    minimize,
    run_word,
    to_dot,
    to_machine,
)
import rbcm.repository as storage

logger = logging.getLogger(__name__)

NAMED_FAMILIES = {"sigma-star": sigma_star, "epsilon": epsilon, "empty": nothing}


def log_service(func):
    """Decorator for rbcm.services to log service start and stop"""

    @wraps(func)
    def service_logger(*args, **kwargs):
        servicename = func.__name__
        logger.info(f"Starting rbcm service {servicename} with {args=}, {kwargs=})")
        out = func(*args, **kwargs)
        logger.info(f"rbcm service {servicename} done")
        return out

    return service_logger


@dataclass(frozen=True)
class Comparison:
    """Bounded language comparison of two machines"""

    max_len: int
    only_left: tuple
    only_right: tuple

    @property
    def equal(self):
        return not self.only_left and not self.only_right


def language(x, max_len, caps=None):
    """Exact set of accepted words up to ``max_len`` for any machine kind

    Raises ``InconclusiveError`` when a capped simulation leaves a word
    without verdict.
    """
    if isinstance(x, FiniteAutomaton):
        return set(automaton_words(x, max_len))
    if isinstance(x, (HybridDecider, ComponentUnion)):
        return set(x.language(max_len))
    return set(enumerate_language(x, max_len, caps).require_exact())


def _counter_machine(x, what):
    if isinstance(x, FiniteAutomaton):
        raise TypeError(f"{what} needs a counter machine, got {x}")
    if isinstance(x, HybridDecider):
        return x.machine if x.machine is not None else x.acceptor()
    return x


@log_service
def validate(x):
    """Parse and validate a machine document

    Parameters
    ----------
    x : str
        fsspec-compatible URL of the machine document.

    Returns
    -------
    str
        One-line description of the machine.
    """
    return str(storage.read(x))


@log_service
def run(x, word, caps=None):
    """Capped simulation of a machine on ``word``

    Returns
    -------
    rbcm.machines.RunResult
    """
    m = _counter_machine(storage.read(x), "run")
    return run_word(m, word, caps or Caps())


@log_service
def member(x, word):
    """Exact membership of ``word``; no simulation caps apply"""
    m = storage.read(x)
    if isinstance(m, (FiniteAutomaton, HybridDecider)):
        return m.accepts(word)
    if m.pushdown:
        raise TypeError(f"exact membership needs a machine without a stack, got {m}")
    return ncm_membership_exact(m, word)


@log_service
def empty(x):
    """Exact emptiness. Returns ``(is_empty, witness)``"""
    m = storage.read(x)
    if isinstance(m, FiniteAutomaton):
        dfa = minimize(m)
        # A shortest accepted word is shorter than the state count.
        words = sorted(automaton_words(dfa, len(dfa.states)), key=canonical)
        return not words, (words[0] if words else None)
    m = _counter_machine(m, "empty")
    if ncm_emptiness(m):
        return True, None
    return False, ncm_witness(m)


@log_service
def enum(x, max_len, caps=None):
    """Accepted words up to ``max_len`` in length-then-lexicographic order"""
    return sorted(language(storage.read(x), max_len, caps), key=canonical)


@log_service
def eq(x, y, max_len, caps=None):
    """Compare the bounded languages of two machines

    Returns
    -------
    Comparison
    """
    left = language(storage.read(x), max_len, caps)
    right = language(storage.read(y), max_len, caps)
    out = Comparison(
        max_len,
        tuple(sorted(left - right, key=canonical)),
        tuple(sorted(right - left, key=canonical)),
    )
    logger.info(f"{x} and {y} up to length {max_len}: equal={out.equal}")
    return out


@log_service
def dot(x, name=None):
    """DOT text for a machine document"""
    m = storage.read(x)
    if isinstance(m, HybridDecider):
        m = m.front
    return "\n".join(to_dot(m, name or "machine")) + "\n"


def family(name_or_url, alphabet):
    """A language family from a name in NAMED_FAMILIES or a document URL"""
    if name_or_url in NAMED_FAMILIES:
        return NAMED_FAMILIES[name_or_url](alphabet)
    x = storage.read(name_or_url)
    if isinstance(x, HybridDecider):
        x = _counter_machine(x, "family")
    return as_family(x)


def _one(operands, n, operation):
    if len(operands) != n:
        raise ValueError(f"{operation} takes {n} machine(s), got {len(operands)}")
    return operands


def _families(specs, n, operation, alphabet):
    if len(specs) != n:
        raise ValueError(f"{operation} takes {n} --family option(s), got {len(specs)}")
    return [family(s, alphabet) for s in specs]


def _apply_dcm1_right_quotient(ms, families, options):
    m1, m2 = _one(ms, 2, "dcm1_right_quotient")
    return dcm1_right_quotient(m1, m2)


def _apply_dcm_right_quotient_general(ms, families, options):
    (m,) = _one(ms, 1, "dcm_right_quotient_general")
    (f,) = _families(families, 1, "dcm_right_quotient_general", m.alphabet)
    return dcm_right_quotient_general(m, f)


def _apply_dcm_prefix(ms, families, options):
    (m,) = _one(ms, 1, "dcm_prefix")
    return dcm_prefix(m)


def _apply_dcm_boolean(ms, families, options):
    op = options.get("op") or "union"
    if op == "intersect_regular":
        m, dfa = _one(ms, 2, op)
        return dcm_boolean(op, m, dfa=dfa)
    return dcm_boolean(op, *ms)


def _apply_dcm_left_quotient_finite(ms, families, options):
    (m,) = _one(ms, 1, "dcm_left_quotient_finite")
    words = options.get("words")
    if words is None:
        raise ValueError("dcm_left_quotient_finite needs --words")
    return dcm_left_quotient_finite(words, m)


def _apply_dcm11_normalize(ms, families, options):
    (m,) = _one(ms, 1, "dcm11_normalize")
    return dcm11_normalize(m).machine


def _apply_dcm11_left_quotient(ms, families, options):
    (m,) = _one(ms, 1, "dcm11_left_quotient")
    (f,) = _families(families, 1, "dcm11_left_quotient", m.alphabet)
    return dcm11_left_quotient(f, m)


def _apply_dcm11_suffix_infix(ms, families, options):
    (m,) = _one(ms, 1, "dcm11_suffix_infix")
    return dcm11_suffix_infix(m, options.get("which") or "suffix")


def _apply_dcm11_two_sided_quotient(ms, families, options):
    (m,) = _one(ms, 1, "dcm11_two_sided_quotient")
    f1, f2 = _families(families, 2, "dcm11_two_sided_quotient", m.alphabet)
    return dcm11_two_sided_quotient(f1, m, f2, order=options.get("order") or "left-first")


def _apply_ncm_quotient(ms, families, options):
    m1, m2 = [
        to_machine(m) if isinstance(m, FiniteAutomaton) else _counter_machine(m, "ncm_quotient")
        for m in _one(ms, 2, "ncm_quotient")
    ]
    return ncm_quotient(options.get("side") or "right", m1, m2)


def _apply_ncm_word_ops(ms, families, options):
    (m,) = _one(ms, 1, "ncm_word_ops")
    gaps = options.get("gaps")
    return ncm_word_ops(options.get("op") or "pref", m, gaps=1 if gaps is None else gaps)


def _apply_regular_quotient_by_family(ms, families, options):
    (r,) = _one(ms, 1, "regular_quotient_by_family")
    if not isinstance(r, FiniteAutomaton):
        raise TypeError(f"regular_quotient_by_family needs an nfa or dfa, got {r}")
    (f,) = _families(families, 1, "regular_quotient_by_family", r.alphabet)
    return regular_quotient_by_family(options.get("side") or "right", r, f)


OPERATIONS = {
    "dcm1_right_quotient": _apply_dcm1_right_quotient,
    "dcm_right_quotient_general": _apply_dcm_right_quotient_general,
    "dcm_prefix": _apply_dcm_prefix,
    "dcm_boolean": _apply_dcm_boolean,
    "dcm_left_quotient_finite": _apply_dcm_left_quotient_finite,
    "dcm11_normalize": _apply_dcm11_normalize,
    "dcm11_left_quotient": _apply_dcm11_left_quotient,
    "dcm11_suffix_infix": _apply_dcm11_suffix_infix,
    "dcm11_two_sided_quotient": _apply_dcm11_two_sided_quotient,
    "ncm_quotient": _apply_ncm_quotient,
    "ncm_word_ops": _apply_ncm_word_ops,
    "regular_quotient_by_family": _apply_regular_quotient_by_family,
}


@log_service
def apply(operation, operands, out, families=(), **options):
    """Run a closure construction on stored machines and write the result

    Parameters
    ----------
    operation : str
        Key of OPERATIONS.
    operands : sequence of str
        fsspec-compatible URLs of the operand machine documents.
    out : str
        fsspec-compatible URL the result document is written to.
    families : sequence of str, optional
        Family operands, each a name in NAMED_FAMILIES or a document URL.
    **options
        ``op``, ``words``, ``which``, ``side``, ``gaps`` or ``order``, as the
        operation needs them.

    Returns
    -------
    The constructed machine.
    """
    if operation not in OPERATIONS:
        raise ValueError(f"unknown operation {operation!r}, expected one of {sorted(OPERATIONS)}")
    machines = [storage.read(u) for u in operands]
    result = OPERATIONS[operation](machines, list(families), options)
    storage.write(out, result)
    return result


@log_service
def gallery_list():
    """Name, flavour and description of every gallery entry"""
    return [(e.name, e.flavor, e.doc) for e in CATALOG.values()]


@log_service
def gallery_build(name, out, member=None):
    """Write a gallery machine; ``member`` picks one machine of a family"""
    built = build_named(name)
    if isinstance(built, dict):
        key = member or CATALOG[name].primary
        if key not in built:
            raise ValueError(f"{name} has no member {key!r}, expected one of {sorted(built)}")
        built = built[key]
    storage.write(out, built)
    return built


@log_service
def gallery_demo(name, max_len=None):
    """Bounded non-closure demonstration report"""
    return demo_nonclosure(name, max_len)
