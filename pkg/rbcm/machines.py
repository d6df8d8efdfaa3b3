"""One-way counter machines, pushdown counter machines and finite automata.

Machines are immutable values. Simulation explores configurations
breadth-first, one input position at a time, so deterministic and
nondeterministic machines share the same engine.
"""

import enum
import itertools
import logging
from collections import deque
from dataclasses import dataclass, replace
from functools import cached_property


logger = logging.getLogger(__name__)

END = "<"
STAY = "S"
RIGHT = "R"

_TREND = {0: "n", 1: "u", -1: "d"}
_DELTA = {-1: "-1", 0: "0", 1: "+1"}


class ResourceLimitError(RuntimeError):
    """A hard resource bound was hit; the computation has no answer."""


class InconclusiveError(RuntimeError):
    """A bounded enumeration holds words whose verdict is Unknown."""


@dataclass(frozen=True)
class Transition:
    """One move of a counter machine.

    ``action`` is ``None`` for machines without a stack, otherwise one of
    ``"pop"``, ``"noop"`` or ``"push:X"``; ``top`` is the stack symbol the
    move is conditioned on.
    """

    source: str
    symbol: str
    status: tuple
    target: str
    move: str
    delta: tuple
    top: str = None
    action: str = None

    def __post_init__(self):
        object.__setattr__(self, "status", tuple(self.status))
        object.__setattr__(self, "delta", tuple(self.delta))


def _transition_key(t):
    return (
        t.source,
        t.symbol,
        t.status,
        t.target,
        t.move,
        t.delta,
        t.top or "",
        t.action or "",
    )


def status_of(values):
    """Project counter values onto the zero/nonzero status vector"""
    return tuple(1 if v > 0 else 0 for v in values)


def all_statuses(k):
    return list(itertools.product((0, 1), repeat=k))


def fresh(name, taken):
    """Suffix ``name`` with primes until it is not in ``taken``"""
    while name in taken:
        name += "'"
    return name


def transition_label(t):
    """Render a transition label as ``"sym, status / move, delta"``"""
    status = "".join(str(s) for s in t.status) or "-"
    delta = ",".join(_DELTA[d] for d in t.delta) or "-"
    label = f"{t.symbol}, {status} / {t.move}, {delta}"
    if t.action is not None:
        label += f", {t.top}:{t.action}"
    return label


@dataclass(frozen=True)
class CounterMachine:
    """One-way machine with ``counters`` reversal-bounded counters.

    Parameters
    ----------
    alphabet : frozenset of str
        Input symbols, the end-marker excluded.
    states : frozenset of str
    initial : str
    finals : frozenset of str
    transitions : tuple of Transition
    counters : int
        Number of counters. Zero gives a finite automaton with end-marker
        lookahead.
    reversal_bound : int
        Alternations between increasing and decreasing allowed per counter.
    deterministic : bool
        Claim that every transition key holds at most one move.
    """

    alphabet: frozenset
    states: frozenset
    initial: str
    finals: frozenset
    transitions: tuple
    counters: int = 1
    reversal_bound: int = 1
    deterministic: bool = False

    def __post_init__(self):
        object.__setattr__(self, "alphabet", frozenset(self.alphabet))
        object.__setattr__(self, "states", frozenset(self.states))
        object.__setattr__(self, "finals", frozenset(self.finals))
        object.__setattr__(
            self,
            "transitions",
            tuple(sorted(set(self.transitions), key=_transition_key)),
        )

    @cached_property
    def table(self):
        """Map (state, symbol, status, top) to the moves available there"""
        table = {}
        for t in self.transitions:
            table.setdefault((t.source, t.symbol, t.status, t.top), []).append(t)
        return {k: tuple(v) for k, v in table.items()}

    @cached_property
    def outgoing(self):
        out = {}
        for t in self.transitions:
            out.setdefault(t.source, []).append(t)
        return out

    def moves(self, state, symbol, status, top=None):
        return self.table.get((state, symbol, tuple(status), top), ())

    @property
    def pushdown(self):
        return False

    @property
    def kind(self):
        return "dcm" if self.deterministic else "ncm"

    def __str__(self):
        return (
            f"{self.kind.upper()}({self.counters},{self.reversal_bound}) "
            f"with {len(self.states)} states, {len(self.transitions)} transitions"
        )


@dataclass(frozen=True)
class PushdownCounterMachine(CounterMachine):
    """Counter machine with a pushdown stack; simulation only."""

    stack_alphabet: frozenset = frozenset()
    bottom: str = "Z"

    def __post_init__(self):
        super().__post_init__()
        object.__setattr__(self, "stack_alphabet", frozenset(self.stack_alphabet))

    @property
    def pushdown(self):
        return True

    @property
    def kind(self):
        return "dpcm" if self.deterministic else "npcm"


@dataclass(frozen=True)
class Configuration:
    state: str
    cursor: int
    counters: tuple
    reversals: tuple
    trend: tuple
    stack: tuple = ()


def initial_configuration(m, state=None, counters=None):
    """Configuration at the start of the input, optionally re-rooted.

    Preloaded counters start in their increasing phase.
    """
    k = m.counters
    values = tuple(counters) if counters is not None else (0,) * k
    if len(values) != k:
        raise ValueError(f"expected {k} counter values, got {values}")
    stack = (m.bottom,) if m.pushdown else ()
    trend = tuple(1 if v > 0 else 0 for v in values)
    return Configuration(
        state if state is not None else m.initial, 0, values, (0,) * k, trend, stack
    )


class Verdict(enum.Enum):
    ACCEPT = "accept"
    REJECT = "reject"
    UNKNOWN = "unknown"


@dataclass(frozen=True)
class RunResult:
    """Outcome of a capped simulation.

    ``bound`` names the cap that truncated the search ("counter", "step" or
    "tail") and is only set for Unknown verdicts. ``trace`` and ``path`` hold
    the configurations and transitions of an accepting run.
    """

    verdict: Verdict
    bound: str = None
    trace: tuple = ()
    path: tuple = ()
    violations: int = 0

    @property
    def accepted(self):
        return self.verdict is Verdict.ACCEPT


@dataclass(frozen=True)
class Caps:
    """Simulation caps. ``None`` selects the defaults derived from the run."""

    counter: int = None
    steps: int = 100_000
    tail: int = None

    def counter_cap(self, length, preload=0):
        if self.counter is not None:
            return self.counter
        return length + 16 + preload

    def tail_cap(self, m):
        if self.tail is not None:
            return self.tail
        return 4 * len(m.states) * (m.reversal_bound + 1) ** m.counters


class _Explorer:
    """Breadth-first configuration search for one input position at a time"""

    def __init__(self, m, caps, counter_cap, record=False):
        self.m = m
        self.counter_cap = counter_cap
        self.tail_cap = caps.tail_cap(m)
        self.step_cap = caps.steps
        self.steps = 0
        self.bound = None
        self.violations = 0
        self.record = record
        self.parents = {}

    def _truncate(self, bound):
        if self.bound is None:
            self.bound = bound

    def successor(self, conf, t):
        counters = tuple(c + d for c, d in zip(conf.counters, t.delta))
        if any(c > self.counter_cap for c in counters):
            self._truncate("counter")
            return None
        reversals = list(conf.reversals)
        trend = list(conf.trend)
        for i, d in enumerate(t.delta):
            if d == 0:
                continue
            if trend[i] and trend[i] != d:
                reversals[i] += 1
            trend[i] = d
        if any(r > self.m.reversal_bound for r in reversals):
            self.violations += 1
            return None
        stack = conf.stack
        if t.action == "pop":
            if len(stack) <= 1:
                return None
            stack = stack[:-1]
        elif t.action is not None and t.action.startswith("push:"):
            stack = stack + (t.action[5:],)
            if len(stack) > self.counter_cap + 1:
                self._truncate("counter")
                return None
        cursor = conf.cursor + (1 if t.move == RIGHT else 0)
        return Configuration(
            t.target, cursor, counters, tuple(reversals), tuple(trend), stack
        )

    def _remember(self, succ, conf, t):
        if self.record and succ not in self.parents:
            self.parents[succ] = (conf, t)

    def advance(self, frontier, symbol):
        """Close ``frontier`` under stay moves on ``symbol``.

        Returns the configurations after a right move, or, on the end-marker,
        the first configuration found in a final state.
        """
        m = self.m
        at_end = symbol == END
        queue = deque(frontier)
        seen = set(frontier)
        tails = dict.fromkeys(frontier, 0)
        moved = []
        moved_seen = set()
        while queue:
            conf = queue.popleft()
            self.steps += 1
            if self.steps > self.step_cap:
                self._truncate("step")
                break
            if at_end and conf.state in m.finals:
                return [], conf
            top = conf.stack[-1] if conf.stack else None
            options = m.moves(conf.state, symbol, status_of(conf.counters), top)
            if m.deterministic:
                assert len(options) <= 1, f"deterministic machine branches at {conf}"
            for t in options:
                succ = self.successor(conf, t)
                if succ is None:
                    continue
                if t.move == RIGHT:
                    if succ not in moved_seen:
                        moved_seen.add(succ)
                        moved.append(succ)
                        self._remember(succ, conf, t)
                    continue
                tail = tails[conf] + 1 if at_end and not any(t.delta) else 0
                if tail > self.tail_cap:
                    self._truncate("tail")
                    continue
                if succ not in seen:
                    seen.add(succ)
                    tails[succ] = tail
                    queue.append(succ)
                    self._remember(succ, conf, t)
        return moved, None


def _trail(parents, conf):
    confs, path = [conf], []
    while conf in parents:
        conf, t = parents[conf]
        confs.append(conf)
        path.append(t)
    return tuple(reversed(confs)), tuple(reversed(path))


def _require_valid(m):
    problems = validate(m)
    if problems:
        raise ValueError(f"Invalid machine ({len(problems)} problems): {problems[0]}")


def run_word(m, word, caps=None, start=None):
    """Decide whether ``m`` accepts ``word`` within the simulation caps.

    Parameters
    ----------
    m : CounterMachine or PushdownCounterMachine
    word : str
    caps : Caps or None, optional
    start : Configuration or None, optional
        Configuration to start from instead of the initial one.

    Returns
    -------
    RunResult
    """
    _require_valid(m)
    caps = caps or Caps()
    start = start or initial_configuration(m)
    preload = max(start.counters, default=0)
    explorer = _Explorer(m, caps, caps.counter_cap(len(word), preload), record=True)
    frontier = [start]
    for symbol in word:
        if not frontier:
            break
        frontier, _ = explorer.advance(frontier, symbol)
    hit = None
    if frontier:
        _, hit = explorer.advance(frontier, END)
    if hit is not None:
        trace, path = _trail(explorer.parents, hit)
        return RunResult(
            Verdict.ACCEPT, trace=trace, path=path, violations=explorer.violations
        )
    if explorer.bound is not None:
        return RunResult(
            Verdict.UNKNOWN, bound=explorer.bound, violations=explorer.violations
        )
    return RunResult(Verdict.REJECT, violations=explorer.violations)


def canonical(word):
    """Sort key putting shorter words first, then lexicographic"""
    return (len(word), word)


@dataclass(frozen=True)
class Enumeration:
    """Verdicts for every word up to ``max_len``.

    Words not listed in ``accepted`` or ``unknown`` were rejected.
    """

    max_len: int
    accepted: frozenset
    unknown: frozenset

    def verdict(self, word):
        if word in self.accepted:
            return Verdict.ACCEPT
        if word in self.unknown:
            return Verdict.UNKNOWN
        return Verdict.REJECT

    def words(self):
        return sorted(self.accepted, key=canonical)

    @property
    def exact(self):
        return not self.unknown

    def require_exact(self):
        """Accepted words, or InconclusiveError if any verdict is Unknown"""
        if self.unknown:
            sample = sorted(self.unknown, key=canonical)[:5]
            raise InconclusiveError(
                f"{len(self.unknown)} words up to length {self.max_len} "
                f"have no verdict, e.g. {sample}"
            )
        return self.accepted


def enumerate_language(m, max_len, caps=None, within=None):
    """Verdicts for all words of length at most ``max_len``.

    Exploration shares work along common prefixes and prunes every prefix
    whose configuration set dies out.

    Parameters
    ----------
    m : CounterMachine or PushdownCounterMachine
    max_len : int
    caps : Caps or None, optional
        The counter cap defaults to ``max_len + 16``.
    within : FiniteAutomaton or None, optional
        DFA restricting the enumerated words.

    Returns
    -------
    Enumeration
    """
    _require_valid(m)
    caps = caps or Caps()
    explorer = _Explorer(m, caps, caps.counter_cap(max_len))
    symbols = set(m.alphabet)
    if within is not None:
        within = within if within.deterministic else determinize(within)
        symbols |= set(within.alphabet)
    symbols = sorted(symbols)
    accepted, unknown = set(), set()

    def visit(prefix, frontier, steps, bound, state):
        if within is None or state in within.finals:
            explorer.steps, explorer.bound = steps, bound
            hit = explorer.advance(frontier, END)[1] if frontier else None
            if hit is not None:
                accepted.add(prefix)
            elif explorer.bound is not None:
                unknown.add(prefix)
        if len(prefix) == max_len:
            return
        for symbol in symbols:
            after = None
            if within is not None:
                after = within.step(state, symbol)
                if after is None:
                    continue
            explorer.steps, explorer.bound = steps, bound
            nxt = explorer.advance(frontier, symbol)[0] if frontier else []
            if not nxt and explorer.bound is None:
                continue
            visit(prefix + symbol, nxt, explorer.steps, explorer.bound, after)

    visit("", [initial_configuration(m)], 0, None, within.initial if within else None)
    logger.debug(
        f"Enumerated {m} up to length {max_len}: "
        f"{len(accepted)} accepted, {len(unknown)} unknown"
    )
    return Enumeration(max_len, frozenset(accepted), frozenset(unknown))


def validate(m):
    """Diagnostics for every broken machine invariant; empty when valid"""
    problems = []
    k = m.counters
    if k < 0:
        problems.append(f"counters must be nonnegative, got {k}")
    if m.reversal_bound < 0:
        problems.append(f"reversal_bound must be nonnegative, got {m.reversal_bound}")
    if END in m.alphabet:
        problems.append(f"alphabet contains the end-marker {END!r}")
    if m.initial not in m.states:
        problems.append(f"initial state {m.initial!r} is not a state")
    for q in sorted(m.finals - m.states):
        problems.append(f"final state {q!r} is not a state")
    stack_symbols = m.stack_alphabet | {m.bottom} if m.pushdown else frozenset()
    for i, t in enumerate(m.transitions):
        where = f"transition {i} ({t.source}, {t.symbol}, {t.status})"
        if t.source not in m.states:
            problems.append(f"{where}: unknown source state {t.source!r}")
        if t.target not in m.states:
            problems.append(f"{where}: unknown target state {t.target!r}")
        if t.symbol != END and t.symbol not in m.alphabet:
            problems.append(f"{where}: symbol {t.symbol!r} not in alphabet")
        if len(t.status) != k or any(s not in (0, 1) for s in t.status):
            problems.append(f"{where}: status must be {k} values in 0/1")
        if len(t.delta) != k or any(d not in (-1, 0, 1) for d in t.delta):
            problems.append(f"{where}: delta {t.delta} must be {k} values in -1/0/+1")
        if t.move not in (STAY, RIGHT):
            problems.append(f"{where}: unknown head move {t.move!r}")
        if t.move == RIGHT and t.symbol == END:
            problems.append(f"{where}: moves right over the end-marker")
        for j, (s, d) in enumerate(zip(t.status, t.delta)):
            if s == 0 and d == -1:
                problems.append(f"{where}: decrements counter {j} on status 0")
        if m.pushdown:
            if t.top not in stack_symbols:
                problems.append(f"{where}: unknown stack top {t.top!r}")
            if t.action == "pop":
                if t.top == m.bottom:
                    problems.append(f"{where}: pops the bottom marker")
            elif t.action is not None and t.action.startswith("push:"):
                pushed = t.action[5:]
                if pushed == m.bottom:
                    problems.append(f"{where}: pushes the bottom marker")
                elif pushed not in m.stack_alphabet:
                    problems.append(f"{where}: pushes unknown symbol {pushed!r}")
            elif t.action != "noop":
                problems.append(f"{where}: unknown stack action {t.action!r}")
        elif t.top is not None or t.action is not None:
            problems.append(f"{where}: stack fields on a machine without a stack")
    if m.deterministic:
        for key, options in m.table.items():
            if len(options) > 1:
                problems.append(
                    f"nondeterministic key ({key[0]}, {key[1]}, {key[2]}): "
                    f"{len(options)} moves"
                )
    return problems


def _crawl(initial, follow):
    """Breadth-first discovery of everything reachable from ``initial``.

    ``follow(node)`` yields ``(label, successor)`` pairs. Returns the nodes in
    discovery order and the list of ``(node, label, successor)`` edges.
    """
    order = [initial]
    seen = {initial}
    edges = []
    i = 0
    while i < len(order):
        node = order[i]
        for label, succ in follow(node):
            edges.append((node, label, succ))
            if succ not in seen:
                seen.add(succ)
                order.append(succ)
        i += 1
    return order, edges


def trim(m):
    """Drop states that are unreachable or cannot reach a final state"""
    forward = {}
    backward = {}
    for t in m.transitions:
        forward.setdefault(t.source, set()).add(t.target)
        backward.setdefault(t.target, set()).add(t.source)
    reach, _ = _crawl(m.initial, lambda q: ((None, r) for r in forward.get(q, ())))
    reach = set(reach)
    useful = set()
    for f in m.finals & reach:
        if f in useful:
            continue
        found, _ = _crawl(f, lambda q: ((None, r) for r in backward.get(q, ())))
        useful |= set(found)
    keep = (reach & useful) | {m.initial}
    transitions = [t for t in m.transitions if t.source in keep and t.target in keep]
    return replace(
        m, states=keep, finals=m.finals & keep, transitions=transitions
    )


def restrict(m, dfa):
    """Synchronized product of ``m`` with a DFA over the same input.

    The DFA moves only when ``m`` consumes a symbol; counters and stack are
    untouched. Accepts L(m) intersected with L(dfa).
    """
    dfa = dfa if dfa.deterministic else determinize(dfa)

    def follow(node):
        q, d = node
        for t in m.outgoing.get(q, ()):
            after = d
            if t.move == RIGHT:
                after = dfa.step(d, t.symbol)
                if after is None:
                    continue
            yield t, (t.target, after)

    order, edges = _crawl((m.initial, dfa.initial), follow)

    def name(node):
        return f"({node[0]},{node[1]})"

    transitions = [
        replace(t, source=name(a), target=name(b)) for a, t, b in edges
    ]
    finals = {name(n) for n in order if n[0] in m.finals and n[1] in dfa.finals}
    return replace(
        m,
        states={name(n) for n in order},
        initial=name(order[0]),
        finals=finals,
        transitions=transitions,
    )


def step_through(m, word, start=None, limit=100_000):
    """Advance a deterministic machine over ``word``.

    Returns the configuration right after the last symbol is consumed, or
    ``None`` when the machine crashes or breaks its reversal bound on the way.
    """
    if not m.deterministic:
        raise ValueError("step_through needs a deterministic machine")
    conf = start or initial_configuration(m)
    explorer = _Explorer(m, Caps(counter=None, steps=limit), counter_cap=float("inf"))
    frontier = [conf]
    for symbol in word:
        frontier, _ = explorer.advance(frontier, symbol)
        if explorer.bound is not None:
            raise ResourceLimitError(
                f"no right move on {symbol!r} within {limit} steps from {conf}"
            )
        if not frontier:
            return None
    return frontier[0]


@dataclass(frozen=True)
class Annotation:
    """A machine whose states carry per-counter reversal bookkeeping.

    ``origin`` maps each annotated state to ``(state, phases)`` where
    ``phases`` holds one ``(reversals, trend)`` pair per counter.
    """

    machine: CounterMachine
    origin: dict


def phase_code(phases):
    return ".".join(f"{r}{_TREND[d]}" for r, d in phases)


def annotate_phases(m):
    """Move reversal counting into the finite control.

    Transitions that would exceed the reversal bound are dropped, so the
    result crashes exactly where a run becomes non-conformant.
    """
    k, bound = m.counters, m.reversal_bound

    def name(node):
        q, phases = node
        return f"{q}@{phase_code(phases)}" if k else q

    def follow(node):
        q, phases = node
        for t in m.outgoing.get(q, ()):
            after = list(phases)
            for i, d in enumerate(t.delta):
                if d == 0:
                    continue
                r, trend = after[i]
                if trend and trend != d:
                    r += 1
                after[i] = (r, d)
            if any(r > bound for r, _ in after):
                continue
            yield t, (t.target, tuple(after))

    order, edges = _crawl((m.initial, ((0, 0),) * k), follow)
    transitions = [replace(t, source=name(a), target=name(b)) for a, t, b in edges]
    annotated = replace(
        m,
        states={name(n) for n in order},
        initial=name(order[0]),
        finals={name(n) for n in order if n[0] in m.finals},
        transitions=transitions,
    )
    logger.debug(f"Annotated reversal phases: {m} -> {annotated}")
    return Annotation(annotated, {name(n): n for n in order})


def settle_stay_loops(m, halt="halt"):
    """Replace provably endless stay chains of a deterministic machine.

    A chain of stay moves that never decrements and revisits a control state
    with the same status runs forever. It becomes a crash, or on the
    end-marker a stay move into a final ``halt`` state when the chain passes
    a final state. Every stay chain of the result terminates when reversal
    violations are already crashes.
    """
    if not m.deterministic:
        raise ValueError("settle_stay_loops needs a deterministic machine")
    if m.pushdown:
        raise TypeError("settle_stay_loops does not handle stack machines")
    halt = fresh(halt, m.states)
    verdicts = {}

    def chain(q, symbol, status):
        path = []
        visited = set()
        node = (q, status)
        while True:
            options = m.moves(node[0], symbol, node[1])
            if not options or options[0].move != STAY:
                return None
            t = options[0]
            if -1 in t.delta:
                return None
            if node in visited:
                return path
            visited.add(node)
            path.append(node)
            node = (
                t.target,
                tuple(max(s, 1 if d > 0 else 0) for s, d in zip(node[1], t.delta)),
            )

    replaced = {}
    for key, options in m.table.items():
        q, symbol, status, _ = key
        if options[0].move != STAY or -1 in options[0].delta:
            continue
        path = chain(q, symbol, status)
        if path is None:
            continue
        if symbol == END and any(p in m.finals for p, _ in path):
            replaced[key] = Transition(
                q, END, status, halt, STAY, (0,) * m.counters
            )
        else:
            replaced[key] = None
    if not replaced:
        return m
    transitions = []
    for t in m.transitions:
        key = (t.source, t.symbol, t.status, t.top)
        if key in replaced:
            if replaced[key] is not None:
                transitions.append(replaced[key])
        else:
            transitions.append(t)
    states, finals = set(m.states), set(m.finals)
    if any(t is not None for t in replaced.values()):
        states.add(halt)
        finals.add(halt)
    logger.debug(f"Settled {len(replaced)} endless stay chains")
    return replace(m, states=states, finals=finals, transitions=transitions)


@dataclass(frozen=True)
class FiniteAutomaton:
    """NFA with optional spontaneous edges; a DFA when ``deterministic``.

    ``edges`` holds ``(source, symbol, target)`` triples with ``symbol`` set
    to ``None`` for spontaneous edges. Symbols may be any sortable hashable.
    """

    alphabet: frozenset
    states: frozenset
    initial: str
    finals: frozenset
    edges: tuple
    deterministic: bool = False

    def __post_init__(self):
        object.__setattr__(self, "alphabet", frozenset(self.alphabet))
        object.__setattr__(self, "states", frozenset(self.states))
        object.__setattr__(self, "finals", frozenset(self.finals))
        object.__setattr__(
            self,
            "edges",
            tuple(
                sorted(
                    set(self.edges),
                    key=lambda e: (e[0], e[1] is not None, str(e[1]), e[2]),
                )
            ),
        )

    @cached_property
    def successors(self):
        out = {}
        for src, sym, dst in self.edges:
            out.setdefault((src, sym), set()).add(dst)
        return {k: frozenset(v) for k, v in out.items()}

    @property
    def kind(self):
        return "dfa" if self.deterministic else "nfa"

    def closure(self, states):
        """Close a state set under spontaneous edges"""
        found = set(states)
        queue = deque(found)
        while queue:
            q = queue.popleft()
            for r in self.successors.get((q, None), ()):
                if r not in found:
                    found.add(r)
                    queue.append(r)
        return frozenset(found)

    def step(self, state, symbol):
        """The unique successor of a DFA state, or ``None``"""
        targets = self.successors.get((state, symbol), ())
        if len(targets) != 1:
            return None
        return next(iter(targets))

    def accepts(self, word):
        current = self.closure({self.initial})
        for symbol in word:
            current = self.closure(
                set().union(*(self.successors.get((q, symbol), ()) for q in current))
            )
            if not current:
                return False
        return bool(current & self.finals)

    def __str__(self):
        return f"{self.kind.upper()} with {len(self.states)} states, {len(self.edges)} edges"


def validate_automaton(fa):
    problems = []
    if fa.initial not in fa.states:
        problems.append(f"initial state {fa.initial!r} is not a state")
    for q in sorted(fa.finals - fa.states):
        problems.append(f"final state {q!r} is not a state")
    for i, (src, sym, dst) in enumerate(fa.edges):
        if src not in fa.states or dst not in fa.states:
            problems.append(f"edge {i} ({src}, {sym}, {dst}): unknown state")
        if sym is not None and sym not in fa.alphabet:
            problems.append(f"edge {i} ({src}, {sym}, {dst}): symbol not in alphabet")
        if fa.deterministic and sym is None:
            problems.append(f"edge {i} ({src}, -, {dst}): spontaneous edge in a DFA")
    if fa.deterministic:
        for (src, sym), targets in fa.successors.items():
            if sym is not None and len(targets) > 1:
                problems.append(f"DFA state {src!r} has {len(targets)} moves on {sym!r}")
    return problems


def _sorted_symbols(alphabet):
    return sorted(alphabet, key=str)


def determinize(fa):
    """Subset construction with spontaneous closure"""

    def name(subset):
        return "{" + ",".join(sorted(subset)) + "}"

    symbols = _sorted_symbols(fa.alphabet)

    def follow(subset):
        for symbol in symbols:
            nxt = fa.closure(
                set().union(*(fa.successors.get((q, symbol), ()) for q in subset))
            )
            if nxt:
                yield symbol, nxt

    order, edges = _crawl(fa.closure({fa.initial}), follow)
    return FiniteAutomaton(
        fa.alphabet,
        {name(s) for s in order},
        name(order[0]),
        {name(s) for s in order if s & fa.finals},
        [(name(a), sym, name(b)) for a, sym, b in edges],
        deterministic=True,
    )


def complete(fa, sink="sink"):
    """Total DFA: missing moves go to a fresh rejecting sink"""
    dfa = fa if fa.deterministic else determinize(fa)
    sink = fresh(sink, dfa.states)
    edges = list(dfa.edges)
    missing = [
        (q, sym)
        for q in sorted(dfa.states)
        for sym in _sorted_symbols(dfa.alphabet)
        if (q, sym) not in dfa.successors
    ]
    if not missing:
        return dfa
    edges += [(q, sym, sink) for q, sym in missing]
    edges += [(sink, sym, sink) for sym in dfa.alphabet]
    return replace(dfa, states=dfa.states | {sink}, edges=edges)


def minimize(fa):
    """Minimal DFA by partition refinement, without the dead state"""
    dfa = complete(fa)
    symbols = _sorted_symbols(dfa.alphabet)
    order, _ = _crawl(dfa.initial, lambda q: ((s, dfa.step(q, s)) for s in symbols))
    block = {q: int(q in dfa.finals) for q in order}
    while True:
        signature = {q: (block[q],) + tuple(block[dfa.step(q, s)] for s in symbols) for q in order}
        ids = {}
        refined = {q: ids.setdefault(signature[q], len(ids)) for q in order}
        if len(ids) == len(set(block.values())):
            break
        block = refined
    dead = {
        block[q]
        for q in order
        if q not in dfa.finals and all(block[dfa.step(q, s)] == block[q] for s in symbols)
    }
    reps = {}
    for q in order:
        reps.setdefault(block[q], q)

    def follow(b):
        for s in symbols:
            nb = block[dfa.step(reps[b], s)]
            if nb not in dead:
                yield s, nb

    start = block[dfa.initial]
    blocks, edges = _crawl(start, follow)
    names = {b: f"m{i}" for i, b in enumerate(blocks)}
    return FiniteAutomaton(
        dfa.alphabet,
        set(names.values()),
        names[start],
        {names[b] for b in blocks if reps[b] in dfa.finals},
        [(names[a], s, names[b]) for a, s, b in edges if a not in dead],
        deterministic=True,
    )


def dfa_algebra(op, a, b=None):
    """Boolean operations and exact equivalence on finite automata.

    Parameters
    ----------
    op : {"union", "intersect", "complement", "difference", "equivalent"}
    a : FiniteAutomaton
    b : FiniteAutomaton or None, optional
        Second operand, required for every op but ``complement``.

    Returns
    -------
    FiniteAutomaton or bool
        A DFA, or the equivalence verdict for ``"equivalent"``.
    """
    if op == "complement":
        dfa = complete(a)
        return replace(dfa, finals=dfa.states - dfa.finals)
    combine = {
        "union": lambda x, y: x or y,
        "intersect": lambda x, y: x and y,
        "difference": lambda x, y: x and not y,
        "equivalent": lambda x, y: x != y,
    }
    if op not in combine:
        raise ValueError(f"unknown automaton operation {op!r}")
    if b is None:
        raise ValueError(f"{op} needs two automata")
    if a.alphabet != b.alphabet:
        raise ValueError(
            f"alphabet mismatch: {sorted(a.alphabet, key=str)} vs {sorted(b.alphabet, key=str)}"
        )
    left, right = complete(a), complete(b)
    symbols = _sorted_symbols(a.alphabet)
    order, edges = _crawl(
        (left.initial, right.initial),
        lambda n: ((s, (left.step(n[0], s), right.step(n[1], s))) for s in symbols),
    )
    marked = {
        n for n in order if combine[op](n[0] in left.finals, n[1] in right.finals)
    }
    if op == "equivalent":
        return not marked

    def name(n):
        return f"({n[0]},{n[1]})"

    return FiniteAutomaton(
        a.alphabet,
        {name(n) for n in order},
        name(order[0]),
        {name(n) for n in marked},
        [(name(x), s, name(y)) for x, s, y in edges],
        deterministic=True,
    )


def automaton_words(fa, max_len):
    """Accepted words up to ``max_len``; strings when symbols are characters"""
    symbols = _sorted_symbols(fa.alphabet)
    as_text = all(isinstance(s, str) and len(s) == 1 for s in symbols)
    found = set()

    def visit(prefix, current):
        if current & fa.finals:
            found.add("".join(prefix) if as_text else tuple(prefix))
        if len(prefix) == max_len:
            return
        for s in symbols:
            nxt = fa.closure(
                set().union(*(fa.successors.get((q, s), ()) for q in current))
            )
            if nxt:
                visit(prefix + [s], nxt)

    visit([], fa.closure({fa.initial}))
    return found


def words_automaton(words, alphabet):
    """DFA for a finite set of words, built as a prefix tree"""
    nodes = {""}
    edges = []
    for w in words:
        for i, s in enumerate(w):
            edges.append((f"w:{w[:i]}", s, f"w:{w[:i + 1]}"))
            nodes.add(w[: i + 1])
    return FiniteAutomaton(
        alphabet,
        {f"w:{n}" for n in nodes},
        "w:",
        {f"w:{w}" for w in words},
        edges,
        deterministic=True,
    )


def sigma_star_automaton(alphabet):
    return FiniteAutomaton(
        alphabet, {"all"}, "all", {"all"}, [("all", s, "all") for s in alphabet], True
    )


def empty_automaton(alphabet):
    return FiniteAutomaton(alphabet, {"none"}, "none", set(), [], True)


def to_machine(fa, counters=0, reversal_bound=1):
    """A counter machine with idle counters accepting L(fa).

    Spontaneous edges become stay moves on every symbol and the end-marker.
    """
    zero = (0,) * counters
    transitions = []
    lookahead = sorted(fa.alphabet) + [END]
    for src, sym, dst in fa.edges:
        if sym is None:
            transitions += [Transition(src, x, zero, dst, STAY, zero) for x in lookahead]
        else:
            transitions.append(Transition(src, sym, zero, dst, RIGHT, zero))
    return CounterMachine(
        fa.alphabet,
        fa.states,
        fa.initial,
        fa.finals,
        transitions,
        counters=counters,
        reversal_bound=reversal_bound,
        deterministic=fa.deterministic,
    )


def counterless_to_nfa(m, status=None):
    """NFA for a machine whose counters never move under a fixed status.

    States ``q|x`` remember the guessed next symbol ``x`` (the end-marker
    included) so stay moves can be replayed without consuming input.
    """
    status = tuple(status) if status is not None else (0,) * m.counters
    used = [t for t in m.transitions if t.status == status]
    for t in used:
        if any(t.delta):
            raise ValueError(f"counter moves under fixed status {status}: {t}")
    lookahead = sorted(m.alphabet) + [END]

    def at(q, x):
        return f"{q}|{x}"

    edges = [(q, None, at(q, x)) for q in m.states for x in lookahead]
    for t in used:
        if t.move == STAY:
            edges.append((at(t.source, t.symbol), None, at(t.target, t.symbol)))
        else:
            edges.append((at(t.source, t.symbol), t.symbol, t.target))
    states = set(m.states) | {at(q, x) for q in m.states for x in lookahead}
    return FiniteAutomaton(
        m.alphabet, states, m.initial, {at(q, END) for q in m.finals}, edges
    )


def _gvquote(s):
    return '"{}"'.format(str(s).replace('"', r"\""))


def to_dot(obj, name="machine"):
    """Yield DOT lines for a counter machine or finite automaton"""
    yield f"digraph {_gvquote(name)} {{"
    yield "  rankdir=LR;"
    yield '  __start [shape=point, label=""];'
    for q in sorted(obj.states):
        shape = "doublecircle" if q in obj.finals else "circle"
        yield f"  {_gvquote(q)} [shape={shape}];"
    yield f"  __start -> {_gvquote(obj.initial)};"
    if isinstance(obj, FiniteAutomaton):
        for src, sym, dst in obj.edges:
            label = "-" if sym is None else sym
            yield f"  {_gvquote(src)} -> {_gvquote(dst)} [label={_gvquote(label)}];"
    else:
        for t in obj.transitions:
            yield (
                f"  {_gvquote(t.source)} -> {_gvquote(t.target)} "
                f"[label={_gvquote(transition_label(t))}];"
            )
    yield "}"
