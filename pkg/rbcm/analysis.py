"""Exact decision procedures for nondeterministic counter machines.

Runs with at most one reversal per counter are made syntactic by the phase
expansion. Path images of the expanded graph are semilinear sets computed
by state elimination; counter balances then cut each linear support down
to the runs that really end in the claimed phases.
"""

import logging
import os
from collections import defaultdict
from dataclasses import dataclass, replace
from functools import cached_property

import dask
import numpy as np

from rbcm.machines import (
    END,
    RIGHT,
    STAY,
    Caps,
    _crawl,
    _gvquote,
    phase_code,
    restrict,
    run_word,
    words_automaton,
)
from rbcm.semilinear import (
    LinearSet,
    ResourceLimitError,
    SemilinearSet,
    solve_nonneg_linear,
    unary_to_upset,
    upset_to_dfa,
)


logger = logging.getLogger(__name__)

ZERO, UP, DOWN, DRAINED = "Z1", "P+", "P-", "Z2"


def max_supports():
    """Upper bound on linear supports held by one path image"""
    return int(os.environ.get("RBCM_MAX_SUPPORTS", 50_000))


def _require_counter_machine(m):
    if m.pushdown:
        raise TypeError(f"{m.kind} machines are simulated only, not analysed")


def _normalize(m):
    """1-reversal machine plus a map from its states to the states of ``m``"""
    _require_counter_machine(m)
    k, bound = m.counters, m.reversal_bound
    if bound == 1 or k == 0:
        return m, {q: q for q in m.states}
    if bound == 0:
        transitions = [t for t in m.transitions if -1 not in t.delta]
        return replace(m, transitions=transitions, reversal_bound=1), {
            q: q for q in m.states
        }

    width = (bound + 2) // 2

    def name(node):
        q, phases = node
        return f"{q}#{phase_code(phases)}"

    def sub_statuses(status, phases):
        # sub-counters above the current increasing phase are still zero
        per_counter = []
        for s, (r, _) in zip(status, phases):
            active = r // 2 + 1
            if s == 0:
                per_counter.append([(0,) * width])
                continue
            options = []
            for bits in range(1, 2 ** active):
                options.append(
                    tuple((bits >> u) & 1 if u < active else 0 for u in range(width))
                )
            per_counter.append(options)
        for combo in _product(per_counter):
            yield tuple(b for part in combo for b in part)

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
            for sub in sub_statuses(t.status, phases):
                delta = [0] * (k * width)
                for i, d in enumerate(t.delta):
                    block = sub[i * width:(i + 1) * width]
                    if d == 1:
                        delta[i * width + after[i][0] // 2] = 1
                    elif d == -1:
                        highest = max(u for u in range(width) if block[u])
                        delta[i * width + highest] = -1
                yield (t, sub, tuple(delta)), (t.target, tuple(after))

    start = (m.initial, ((0, 0),) * k)
    order, edges = _crawl(start, follow)
    transitions = [
        replace(t, source=name(a), target=name(b), status=sub, delta=delta)
        for a, (t, sub, delta), b in edges
    ]
    normalized = replace(
        m,
        states={name(n) for n in order},
        initial=name(start),
        finals={name(n) for n in order if n[0] in m.finals},
        transitions=transitions,
        counters=k * width,
        reversal_bound=1,
    )
    logger.debug(f"Normalized reversals: {m} -> {normalized}")
    return normalized, {name(n): n[0] for n in order}


def _product(lists):
    combos = [()]
    for options in lists:
        combos = [c + (o,) for c in combos for o in options]
    return combos


def normalize_reversals(m):
    """Equivalent machine whose counters are all 1-reversal.

    A counter with ``l`` reversals is split into ``ceil((l + 1) / 2)``
    sub-counters, one per increasing phase. Decrements hit the highest
    nonzero sub-counter, which the status vector reveals, so determinism is
    preserved.
    """
    return _normalize(m)[0]


@dataclass(frozen=True)
class PhaseNode:
    """Control state, per-counter phase and the symbol under the head"""

    state: str
    phases: tuple
    look: str


START = PhaseNode(None, (), None)


def _node_key(n):
    return (n.state is not None, n.state or "", n.phases, n.look or "")


@dataclass(frozen=True)
class PhaseEdge:
    source: PhaseNode
    target: PhaseNode
    symbol: str
    delta: tuple
    transition: object
    switches: tuple = ()


@dataclass(frozen=True)
class PhaseGraph:
    """Phase-expanded control graph, trimmed to start-to-final paths"""

    machine: object
    nodes: frozenset
    edges: tuple
    finals: frozenset

    @property
    def start(self):
        return START

    def control(self):
        """Distinct (state, phases) pairs, ignoring the head symbol"""
        return {(n.state, n.phases) for n in self.nodes if n is not START}

    def to_dot(self, name="phases"):
        def label(n):
            if n is START:
                return "start"
            return f"{n.state} [{','.join(n.phases)}] {n.look}"

        yield f"digraph {_gvquote(name)} {{"
        yield "  rankdir=LR;"
        for n in sorted(self.nodes, key=_node_key):
            shape = "doublecircle" if n in self.finals else "circle"
            if n is START:
                shape = "point"
            yield f"  {_gvquote(label(n))} [shape={shape}];"
        for e in self.edges:
            text = f"{e.symbol or '-'} {','.join(str(d) for d in e.delta)}"
            yield f"  {_gvquote(label(e.source))} -> {_gvquote(label(e.target))} [label={_gvquote(text)}];"
        yield "}"


def _phase_steps(phases, t):
    options = [()]
    for phase, s, d in zip(phases, t.status, t.delta):
        if (phase in (ZERO, DRAINED)) != (s == 0):
            return []
        if d == 0:
            nxt = [phase]
        elif d == 1:
            nxt = [UP] if phase in (ZERO, UP) else []
        else:
            nxt = [DOWN, DRAINED]
        options = [o + (p,) for o in options for p in nxt]
    return options


def phase_expand(m):
    """Expand a 1-reversal machine into its phase graph.

    Each counter runs through Z1 (zero, untouched), P+ (increasing), P-
    (decreasing, still positive) and Z2 (drained). A decrement branches into
    P- or Z2; counter balances decide later which branch was real.

    Raises
    ------
    ValueError
        If the machine allows more than one reversal per counter.
    """
    _require_counter_machine(m)
    if m.reversal_bound > 1:
        raise ValueError(
            f"phase expansion needs 1-reversal counters, got bound {m.reversal_bound}"
        )
    k = m.counters
    looks = sorted(m.alphabet) + [END]
    zero = (0,) * k

    def follow(node):
        if node is START:
            for look in looks:
                target = PhaseNode(m.initial, (ZERO,) * k, look)
                yield PhaseEdge(START, target, None, zero, None), target
            return
        for t in m.outgoing.get(node.state, ()):
            if t.symbol != node.look:
                continue
            for phases in _phase_steps(node.phases, t):
                switches = tuple(i for i in range(k) if phases[i] != node.phases[i])
                if t.move == STAY:
                    target = PhaseNode(t.target, phases, node.look)
                    yield PhaseEdge(node, target, None, t.delta, t, switches), target
                    continue
                for look in looks:
                    target = PhaseNode(t.target, phases, look)
                    yield PhaseEdge(node, target, t.symbol, t.delta, t, switches), target

    order, raw = _crawl(START, follow)
    finals = {n for n in order if n is not START and n.state in m.finals and n.look == END}
    backward = defaultdict(set)
    for _, e, _ in raw:
        backward[e.target].add(e.source)
    useful = set()
    stack = list(finals)
    while stack:
        n = stack.pop()
        if n in useful:
            continue
        useful.add(n)
        stack.extend(backward[n])
    useful.add(START)
    edges = tuple(e for _, e, _ in raw if e.source in useful and e.target in useful)
    graph = PhaseGraph(m, frozenset(useful), edges, frozenset(finals))
    logger.debug(
        f"Phase graph of {m}: {len(graph.nodes)} nodes, {len(edges)} edges, "
        f"{len(finals)} finals"
    )
    return graph


def lift_run(graph, word, result):
    """Map an accepting run of ``graph.machine`` onto a start-to-final path.

    Returns the list of phase edges, or ``None`` when the run has no image.
    """
    index = {(e.source, e.target, e.transition): e for e in graph.edges}
    k = graph.machine.counters

    def look(conf):
        return word[conf.cursor] if conf.cursor < len(word) else END

    first = result.trace[0]
    node = PhaseNode(first.state, (ZERO,) * k, look(first))
    lifted = [index.get((START, node, None))]
    for t, after in zip(result.path, result.trace[1:]):
        phases = []
        for i, d in enumerate(t.delta):
            if d == 0:
                phases.append(node.phases[i])
            elif d == 1:
                phases.append(UP)
            else:
                phases.append(DOWN if after.counters[i] > 0 else DRAINED)
        nxt = PhaseNode(after.state, tuple(phases), look(after))
        lifted.append(index.get((node, nxt, t)))
        node = nxt
    if None in lifted or node not in graph.finals:
        return None
    return lifted


def _coordinates(edge, k, letters):
    vec = [0] * (2 * k + len(letters))
    for i, d in enumerate(edge.delta):
        if d == 1:
            vec[2 * i] = 1
        elif d == -1:
            vec[2 * i + 1] = 1
    if letters and edge.symbol is not None:
        if edge.symbol not in letters:
            raise ValueError(f"symbol {edge.symbol!r} is not among letters {letters}")
        vec[2 * k + letters.index(edge.symbol)] = 1
    return tuple(vec)


def _zero_components(size, edges):
    """Strongly connected components of the zero-weight edges, by root id"""
    forward, backward = defaultdict(list), defaultdict(list)
    for u, v in edges:
        forward[u].append(v)
        backward[v].append(u)
    order, seen = [], set()
    for s in range(size):
        if s in seen:
            continue
        seen.add(s)
        stack = [(s, iter(forward[s]))]
        while stack:
            v, it = stack[-1]
            for w in it:
                if w not in seen:
                    seen.add(w)
                    stack.append((w, iter(forward[w])))
                    break
            else:
                stack.pop()
                order.append(v)
    root = {}
    for s in reversed(order):
        if s in root:
            continue
        root[s] = s
        stack = [s]
        while stack:
            v = stack.pop()
            for w in backward[v]:
                if w not in root:
                    root[w] = s
                    stack.append(w)
    return root


def path_images(graph, letters=(), key=None):
    """Semilinear image of start-to-final paths, grouped by final node.

    Coordinates are increments and decrements per counter followed by one
    count per letter in ``letters``.

    Parameters
    ----------
    graph : PhaseGraph
    letters : tuple of str, optional
    key : callable or None, optional
        Maps a final node to its group; defaults to the node's phases.

    Returns
    -------
    dict
        Group to SemilinearSet.

    Raises
    ------
    ResourceLimitError
        If a path image holds more than ``RBCM_MAX_SUPPORTS`` supports.
    """
    key = key or (lambda node: node.phases)
    letters = tuple(letters)
    k = graph.machine.counters
    dim = 2 * k + len(letters)
    nodes = [START] + sorted(graph.nodes - {START}, key=_node_key)
    ids = {n: i for i, n in enumerate(nodes)}
    groups = sorted({key(f) for f in graph.finals}, key=repr)
    sinks = {g: len(nodes) + j for j, g in enumerate(groups)}
    size = len(nodes) + len(groups)

    weighted = [
        (ids[e.source], ids[e.target], _coordinates(e, k, letters)) for e in graph.edges
    ]
    weighted += [(ids[f], sinks[key(f)], (0,) * dim) for f in graph.finals]
    root = _zero_components(size, [(u, v) for u, v, w in weighted if not any(w)])

    points = defaultdict(set)
    for u, v, w in weighted:
        ru, rv = root[u], root[v]
        if ru == rv and not any(w):
            continue
        points[(ru, rv)].add(w)

    succ = defaultdict(dict)
    pred = defaultdict(set)
    for (u, v), ws in points.items():
        succ[u][v] = SemilinearSet(dim, tuple(LinearSet(w) for w in sorted(ws)))
        pred[v].add(u)

    cap = max_supports()
    source = root[0]
    ends = {root[s] for s in sinks.values()}
    inner = {root[i] for i in range(size)} - {source} - ends
    while inner:
        x = min(inner, key=lambda n: (len(pred[n] - {n}) * len(set(succ[n]) - {n}), n))
        inner.discard(x)
        loop = succ[x].pop(x, None)
        pred[x].discard(x)
        star = loop.star() if loop is not None else None
        ins = [(u, succ[u].pop(x)) for u in sorted(pred.pop(x, ()))]
        outs = sorted(succ.pop(x, {}).items())
        for v, _ in outs:
            pred[v].discard(x)
        for u, wi in ins:
            head = wi.plus(star) if star is not None else wi
            for v, wo in outs:
                w = head.plus(wo)
                if v in succ[u]:
                    w = succ[u][v].union(w)
                w = w.simplified()
                if len(w) > cap:
                    raise ResourceLimitError(
                        f"path image grew past {cap} supports (RBCM_MAX_SUPPORTS)"
                    )
                succ[u][v] = w
                pred[v].add(u)

    images = {}
    for g in groups:
        image = succ[source].get(root[sinks[g]], SemilinearSet.empty(dim))
        images[g] = image
    logger.debug(
        f"Path images: {len(groups)} groups, "
        f"{sum(len(s) for s in images.values())} supports"
    )
    return images


@dataclass(frozen=True)
class FlowSystem:
    """Counter balance constraints on one linear support of a path image.

    A counter ending in Z2 must be balanced; one ending in P- keeps at
    least one unit, written with a slack variable. Only periods that move a
    constrained balance become unknowns; the rest stay free.
    """

    group: object
    phases: tuple
    support: LinearSet
    norm_cap: int = 256

    @property
    def dimension(self):
        return self.support.dimension

    @cached_property
    def equations(self):
        """``(A, b, used periods, free periods)``"""
        bounded = [i for i, ph in enumerate(self.phases) if ph in (DOWN, DRAINED)]

        def net(v, i):
            return v[2 * i] - v[2 * i + 1]

        periods = self.support.periods
        used = [p for p in periods if any(net(p, i) for i in bounded)]
        free = [p for p in periods if p not in used]
        slacks = [i for i in bounded if self.phases[i] == DOWN]
        A = np.zeros((len(bounded), len(used) + len(slacks)), dtype=np.int64)
        b = np.zeros(len(bounded), dtype=np.int64)
        c = self.support.constant
        for r, i in enumerate(bounded):
            for j, p in enumerate(used):
                A[r, j] = net(p, i)
            if self.phases[i] == DOWN:
                A[r, len(used) + slacks.index(i)] = -1
                b[r] = 1 - net(c, i)
            else:
                b[r] = -net(c, i)
        return A, b, used, free

    def solutions(self):
        """Vectors of the support that satisfy every balance"""
        A, b, used, free = self.equations
        if A.shape[0] == 0:
            return SemilinearSet(self.dimension, (self.support,))
        solved = solve_nonneg_linear(A, b, norm_cap=self.norm_cap)
        basis = np.array(used, dtype=np.int64).reshape(len(used), self.dimension)
        c = np.array(self.support.constant, dtype=np.int64)
        comps = []
        for comp in solved.components:
            t0 = np.array(comp.constant[: len(used)], dtype=np.int64)
            periods = [np.array(h[: len(used)], dtype=np.int64) @ basis for h in comp.periods]
            comps.append(LinearSet(c + t0 @ basis, periods + list(free)))
        return SemilinearSet(self.dimension, tuple(comps))


def flow_systems(m, letters=(), by_final=False, norm_cap=256):
    """One FlowSystem per linear support of every final group of ``m``"""
    normalized, origin = _normalize(m)
    graph = phase_expand(normalized)

    def key(node):
        return (origin[node.state] if by_final else None, node.phases)

    images = path_images(graph, letters, key)
    return [
        FlowSystem(label, phases, comp, norm_cap)
        for (label, phases), image in images.items()
        for comp in image.components
    ]


def _solve_all(systems):
    tasks = [dask.delayed(fs.solutions)() for fs in systems]
    return list(dask.compute(*tasks))


def ncm_emptiness(m):
    """Exact emptiness of L(m); True means no word is accepted"""
    systems = flow_systems(m)
    solved = _solve_all(systems)
    empty = all(s.is_empty for s in solved)
    logger.info(f"Emptiness of {m}: {'empty' if empty else 'nonempty'}")
    return empty


def _arrangements(letters, counts):
    """Distinct words with the given letter counts, lexicographically"""
    counts = list(counts)
    total = sum(counts)
    prefix = []

    def build():
        if len(prefix) == total:
            yield "".join(prefix)
            return
        for i, a in enumerate(letters):
            if counts[i]:
                counts[i] -= 1
                prefix.append(a)
                yield from build()
                prefix.pop()
                counts[i] += 1

    yield from build()


def ncm_witness(m, attempts=200_000):
    """A word accepted by ``m``, or ``None`` when L(m) is empty.

    Letter counts come from the minimal solutions of a feasible support;
    arrangements of those letters are then simulated until one is accepted.
    """
    letters = tuple(sorted(m.alphabet))
    k = _normalize(m)[0].counters
    vectors = set()
    for solved in _solve_all(flow_systems(m, letters)):
        vectors |= {comp.constant for comp in solved.components}
    for vec in sorted(vectors, key=lambda v: (sum(v[2 * k:]), v)):
        counts = vec[2 * k:]
        caps = Caps(counter=sum(vec[: 2 * k : 2]) + 1, steps=10 ** 6, tail=10 ** 6)
        for i, word in enumerate(_arrangements(letters, counts)):
            if i >= attempts:
                break
            if run_word(m, word, caps).accepted:
                logger.debug(f"Witness for {m}: {word!r}")
                return word
    return None


def ncm_membership_exact(m, w):
    """Exact membership, as emptiness of ``m`` restricted to ``{w}``"""
    if any(s not in m.alphabet for s in w):
        return False
    return not ncm_emptiness(restrict(m, words_automaton([w], m.alphabet)))


def _unary_letter(m, letter):
    if len(m.alphabet) > 1:
        raise ValueError(f"unary machine expected, alphabet is {sorted(m.alphabet)}")
    if letter is None:
        letter = next(iter(m.alphabet)) if m.alphabet else "a"
    return letter


def _unary(systems):
    image = SemilinearSet.empty(1)
    for solved in _solve_all(systems):
        image = image.union(solved.project([solved.dimension - 1]))
    return unary_to_upset(image.simplified())


def ncm_unary_extract(m, letter=None):
    """Exact DFA for a machine over a one-letter alphabet.

    Returns
    -------
    tuple
        ``(UltimatelyPeriodicSet, FiniteAutomaton)``
    """
    letter = _unary_letter(m, letter)
    upset = _unary(flow_systems(m, (letter,)))
    logger.debug(f"Unary language of {m}: {upset}")
    return upset, upset_to_dfa(upset, letter)


def ncm_unary_extract_by_final(m, letter=None):
    """Unary languages split by the final state a run ends in"""
    letter = _unary_letter(m, letter)
    systems = flow_systems(m, (letter,), by_final=True)
    out = {}
    for q in sorted(m.finals):
        upset = _unary([fs for fs in systems if fs.group == q])
        out[q] = (upset, upset_to_dfa(upset, letter))
    return out


def _check_letter_bounded(m, letters):
    """Reject machines that may read a letter after a later one"""
    rank = {a: i for i, a in enumerate(letters)}
    missing = sorted(set(m.alphabet) - set(rank))
    if missing:
        raise ValueError(f"letters {missing} missing from the letter order {letters}")
    last = defaultdict(set)
    last[m.initial].add(-1)
    changed = True
    while changed:
        changed = False
        for t in m.transitions:
            if not last[t.source]:
                continue
            if t.move == RIGHT:
                j = rank[t.symbol]
                if max(last[t.source]) > j:
                    raise ValueError(
                        f"state {t.source!r} may read {t.symbol!r} after a later letter"
                    )
                new = {j}
            else:
                new = last[t.source]
            if not new <= last[t.target]:
                last[t.target] |= new
                changed = True


def ncm_parikh_bounded(m, letters):
    """Exponent vectors of a machine reading within ``a1* a2* ... ak*``.

    Returns
    -------
    SemilinearSet
        Over N^k, one coordinate per letter.
    """
    letters = tuple(letters)
    _check_letter_bounded(m, letters)
    image = SemilinearSet.empty(len(letters))
    for solved in _solve_all(flow_systems(m, letters)):
        dim = solved.dimension
        image = image.union(solved.project(range(dim - len(letters), dim)))
    return image.simplified()
