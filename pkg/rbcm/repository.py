"""Objects to read and write machine documents.

Machine documents are JSON. Counter machines carry ``kind`` ``"ncm"``,
``"dcm"``, ``"npcm"`` or ``"dpcm"``; finite automata ``"nfa"`` or ``"dfa"``;
right quotients that keep a semilinear acceptance table ``"hybrid"``.
"""

import json
import logging
import re

import fsspec

from rbcm.closures import ComponentUnion, HybridDecider
from rbcm.machines import (
    CounterMachine,
    FiniteAutomaton,
    PushdownCounterMachine,
    Transition,
    validate,
    validate_automaton,
)
from rbcm.semilinear import LinearSet, SemilinearSet


logger = logging.getLogger(__name__)

COUNTER_KINDS = ("ncm", "dcm", "npcm", "dpcm")
AUTOMATON_KINDS = ("nfa", "dfa")
KINDS = COUNTER_KINDS + AUTOMATON_KINDS + ("hybrid",)

_MACHINE_KEYS = {
    "kind",
    "counters",
    "reversal_bound",
    "alphabet",
    "states",
    "initial",
    "finals",
    "transitions",
}
_PUSHDOWN_KEYS = {"stack_alphabet", "bottom"}
_AUTOMATON_KEYS = {"kind", "alphabet", "states", "initial", "finals", "transitions"}
_HYBRID_KEYS = {"kind", "front", "letters", "table", "note", "machine"}
_TRANSITION_KEYS = {"from", "symbol", "status", "to", "move", "delta", "stack"}
_EDGE_KEYS = {"from", "symbol", "to"}

_WHERE = re.compile(r"^transition (\d+) ")


class MachineDocError(ValueError):
    """A machine document violates the schema; ``path`` locates the field"""

    def __init__(self, path, message):
        self.path = path
        super().__init__(f"{path}: {message}" if path else message)


def _require(doc, key, path, kind=None):
    if key not in doc:
        raise MachineDocError(path, f"missing required key {key!r}")
    value = doc[key]
    if kind is not None and not isinstance(value, kind):
        raise MachineDocError(
            _join(path, key), f"expected {_typename(kind)}, got {type(value).__name__}"
        )
    return value


def _typename(kind):
    if isinstance(kind, tuple):
        return " or ".join(k.__name__ for k in kind)
    return kind.__name__


def _join(path, key):
    if isinstance(key, int):
        return f"{path}[{key}]"
    return f"{path}.{key}" if path else key


def _check_keys(doc, allowed, path):
    if not isinstance(doc, dict):
        raise MachineDocError(path, f"expected an object, got {type(doc).__name__}")
    unknown = sorted(set(doc) - allowed)
    if unknown:
        raise MachineDocError(path, f"unknown keys {unknown}")


def _integer(doc, key, path, minimum=0):
    value = _require(doc, key, path)
    if isinstance(value, bool) or not isinstance(value, int) or value < minimum:
        raise MachineDocError(_join(path, key), f"expected an integer >= {minimum}")
    return value


def _strings(doc, key, path, single=False):
    values = _require(doc, key, path, list)
    for i, v in enumerate(values):
        if not isinstance(v, str) or (single and len(v) != 1):
            want = "a single-character string" if single else "a string"
            raise MachineDocError(_join(_join(path, key), i), f"expected {want}")
    return values


def _vector(record, key, path, length, allowed):
    values = _require(record, key, path, list)
    where = _join(path, key)
    if len(values) != length:
        raise MachineDocError(where, f"expected {length} values, got {len(values)}")
    for i, v in enumerate(values):
        if isinstance(v, bool) or v not in allowed:
            raise MachineDocError(_join(where, i), f"expected one of {sorted(allowed)}")
    return tuple(values)


def _transition(record, path, counters, pushdown):
    _check_keys(record, _TRANSITION_KEYS, path)
    source = _require(record, "from", path, str)
    symbol = _require(record, "symbol", path, str)
    target = _require(record, "to", path, str)
    move = _require(record, "move", path, str)
    if move not in ("S", "R"):
        raise MachineDocError(_join(path, "move"), f"expected 'S' or 'R', got {move!r}")
    status = _vector(record, "status", path, counters, {0, 1})
    delta = _vector(record, "delta", path, counters, {-1, 0, 1})
    top = action = None
    if pushdown:
        stack = _require(record, "stack", path, dict)
        where = _join(path, "stack")
        _check_keys(stack, {"top", "action"}, where)
        top = _require(stack, "top", where, str)
        action = _require(stack, "action", where, str)
    elif "stack" in record:
        raise MachineDocError(_join(path, "stack"), "stack fields on a machine without a stack")
    return Transition(source, symbol, status, target, move, delta, top, action)


def _surface(problems, where, path):
    """Raise one MachineDocError carrying every validation problem"""
    if not problems:
        return
    located = []
    for p in problems:
        m = where.match(p)
        located.append(f"{path}[{m.group(1)}] {p}" if m else p)
    raise MachineDocError("", "; ".join(located))


def _parse_counter_machine(doc, path=""):
    kind = doc["kind"]
    pushdown = kind in ("npcm", "dpcm")
    allowed = _MACHINE_KEYS | (_PUSHDOWN_KEYS if pushdown else set())
    _check_keys(doc, allowed, path)
    counters = _integer(doc, "counters", path)
    records = _require(doc, "transitions", path, list)
    transitions = [
        _transition(r, _join(_join(path, "transitions"), i), counters, pushdown)
        for i, r in enumerate(records)
    ]
    fields = dict(
        alphabet=_strings(doc, "alphabet", path, single=True),
        states=_strings(doc, "states", path),
        initial=_require(doc, "initial", path, str),
        finals=_strings(doc, "finals", path),
        transitions=transitions,
        counters=counters,
        reversal_bound=_integer(doc, "reversal_bound", path),
        deterministic=kind in ("dcm", "dpcm"),
    )
    if pushdown:
        m = PushdownCounterMachine(
            **fields,
            stack_alphabet=_strings(doc, "stack_alphabet", path, single=True),
            bottom=doc.get("bottom", "Z"),
        )
    else:
        m = CounterMachine(**fields)
    # Positions in the machine are canonical; report against the document.
    order = {t: i for i, t in enumerate(transitions)}
    problems = [_relocate(p, m, order) for p in validate(m)]
    _surface(problems, _WHERE, _join(path, "transitions"))
    return m


def _relocate(problem, m, order):
    """Point a validate() diagnostic at the document's own transition index"""
    found = _WHERE.match(problem)
    if not found:
        return problem
    t = m.transitions[int(found.group(1))]
    return f"transition {order[t]} " + problem[found.end():]


def _parse_automaton(doc, path=""):
    _check_keys(doc, _AUTOMATON_KEYS, path)
    edges = []
    for i, record in enumerate(_require(doc, "transitions", path, list)):
        where = _join(_join(path, "transitions"), i)
        _check_keys(record, _EDGE_KEYS, where)
        symbol = record.get("symbol")
        if symbol is not None and not isinstance(symbol, str):
            raise MachineDocError(_join(where, "symbol"), "expected a string or null")
        edges.append(
            (_require(record, "from", where, str), symbol, _require(record, "to", where, str))
        )
    fa = FiniteAutomaton(
        alphabet=_strings(doc, "alphabet", path, single=True),
        states=_strings(doc, "states", path),
        initial=_require(doc, "initial", path, str),
        finals=_strings(doc, "finals", path),
        edges=edges,
        deterministic=doc["kind"] == "dfa",
    )
    problems = validate_automaton(fa)
    if problems:
        raise MachineDocError(path, "; ".join(problems))
    return fa


def _parse_semilinear(records, dimension, path):
    if not isinstance(records, list):
        raise MachineDocError(path, "expected a list of linear sets")
    components = []
    for i, record in enumerate(records):
        where = _join(path, i)
        _check_keys(record, {"constant", "periods"}, where)
        constant = _require(record, "constant", where, list)
        periods = record.get("periods", [])
        try:
            components.append(LinearSet(tuple(constant), tuple(tuple(p) for p in periods)))
        except (TypeError, ValueError) as e:
            raise MachineDocError(where, str(e)) from e
        if len(constant) != dimension:
            raise MachineDocError(
                _join(where, "constant"), f"expected {dimension} values, got {len(constant)}"
            )
    return SemilinearSet(dimension, tuple(components))


def _parse_hybrid(doc, path=""):
    _check_keys(doc, _HYBRID_KEYS, path)
    front = _require(doc, "front", path, dict)
    if front.get("kind") != "dcm":
        raise MachineDocError(_join(path, "front.kind"), "hybrid front-end must be a dcm")
    front = _parse_counter_machine(front, _join(path, "front"))
    table = {
        q: _parse_semilinear(records, front.counters, _join(_join(path, "table"), q))
        for q, records in _require(doc, "table", path, dict).items()
    }
    machine = doc.get("machine")
    if machine is not None:
        machine = parse_machine(machine)
    try:
        return HybridDecider(
            front=front,
            table=table,
            letters=tuple(_strings(doc, "letters", path, single=True)),
            note=doc.get("note", ""),
            machine=machine,
        )
    except ValueError as e:
        raise MachineDocError(_join(path, "table"), str(e)) from e


def parse_machine(doc):
    """Build a machine from a decoded machine document

    Parameters
    ----------
    doc : dict

    Returns
    -------
    CounterMachine, PushdownCounterMachine, FiniteAutomaton or HybridDecider

    Raises
    ------
    MachineDocError
        On schema violations and on any ``validate`` diagnostic.
    """
    if not isinstance(doc, dict):
        raise MachineDocError("", f"expected an object, got {type(doc).__name__}")
    kind = _require(doc, "kind", "", str)
    if kind not in KINDS:
        raise MachineDocError("kind", f"unknown kind {kind!r}, expected one of {list(KINDS)}")
    if kind in COUNTER_KINDS:
        return _parse_counter_machine(doc)
    if kind in AUTOMATON_KINDS:
        return _parse_automaton(doc)
    return _parse_hybrid(doc)


def _serialize_counter_machine(m):
    doc = {
        "kind": m.kind,
        "counters": m.counters,
        "reversal_bound": m.reversal_bound,
        "alphabet": sorted(m.alphabet),
        "states": sorted(m.states),
        "initial": m.initial,
        "finals": sorted(m.finals),
    }
    if m.pushdown:
        doc["stack_alphabet"] = sorted(m.stack_alphabet)
        doc["bottom"] = m.bottom
    transitions = []
    for t in m.transitions:
        record = {
            "from": t.source,
            "symbol": t.symbol,
            "status": list(t.status),
            "to": t.target,
            "move": t.move,
            "delta": list(t.delta),
        }
        if m.pushdown:
            record["stack"] = {"top": t.top, "action": t.action}
        transitions.append(record)
    doc["transitions"] = transitions
    return doc


def _serialize_automaton(fa):
    return {
        "kind": fa.kind,
        "alphabet": sorted(fa.alphabet),
        "states": sorted(fa.states),
        "initial": fa.initial,
        "finals": sorted(fa.finals),
        "transitions": [{"from": s, "symbol": x, "to": d} for s, x, d in fa.edges],
    }


def _serialize_semilinear(s):
    return [
        {"constant": list(c.constant), "periods": [list(p) for p in c.periods]}
        for c in s.components
    ]


def serialize_machine(obj):
    """Machine document for ``obj`` with canonically ordered fields

    A ComponentUnion is stored as its combined DCM.
    """
    if isinstance(obj, ComponentUnion):
        obj = obj.combined
    if isinstance(obj, HybridDecider):
        doc = {
            "kind": "hybrid",
            "front": _serialize_counter_machine(obj.front),
            "letters": list(obj.letters),
            "table": {q: _serialize_semilinear(obj.table[q]) for q in sorted(obj.table)},
            "note": obj.note,
        }
        if obj.machine is not None:
            doc["machine"] = serialize_machine(obj.machine)
        return doc
    if isinstance(obj, CounterMachine):
        return _serialize_counter_machine(obj)
    if isinstance(obj, FiniteAutomaton):
        return _serialize_automaton(obj)
    raise TypeError(f"cannot serialize {type(obj).__name__} as a machine document")


def dumps(obj):
    """Canonical JSON text of ``obj``'s machine document"""
    return json.dumps(serialize_machine(obj), indent=2, sort_keys=True) + "\n"


def loads(text, source="<string>"):
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise MachineDocError("", f"{source} is not JSON: {e}") from e
    return parse_machine(doc)


def read(url_or_path):
    """Read a machine document

    Parameters
    ----------
    url_or_path : str
        Location of the JSON document, any fsspec URL.

    Returns
    -------
    CounterMachine, FiniteAutomaton or HybridDecider
    """
    logger.debug(f"Reading {url_or_path}")
    with fsspec.open(url_or_path, mode="r") as f:
        x = loads(f.read(), source=url_or_path)
    logger.info(f"Read {url_or_path}")
    return x


def write(url_or_path, x):
    """Write a machine document

    Parameters
    ----------
    url_or_path : str
        Location to write the JSON document to.
    x : CounterMachine, FiniteAutomaton, HybridDecider or ComponentUnion
    """
    logger.debug(f"Writing {url_or_path}")
    logger.debug(f"Output machine {x}")
    with fsspec.open(url_or_path, mode="w") as f:
        f.write(dumps(x))
    logger.info(f"Written {url_or_path}")
