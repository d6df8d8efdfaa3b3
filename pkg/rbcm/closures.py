"""Quotient, prefix, suffix, infix and boolean constructions on counter machines.

Every construction returns a fresh machine (or a small bundle of machines)
and never mutates its inputs. Nondeterministic constructions share one
product builder, ``_weave``, which reads some segments of the input and
guesses the others.
"""

import itertools
import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass, field, replace
from functools import cached_property

import dask

from rbcm.analysis import (
    ncm_emptiness,
    ncm_parikh_bounded,
    ncm_unary_extract_by_final,
)
from rbcm.machines import (
    END,
    RIGHT,
    STAY,
    CounterMachine,
    FiniteAutomaton,
    Transition,
    _crawl,
    all_statuses,
    annotate_phases,
    complete,
    counterless_to_nfa,
    determinize,
    dfa_algebra,
    empty_automaton,
    enumerate_language,
    fresh,
    minimize,
    restrict,
    run_word,
    settle_stay_loops,
    sigma_star_automaton,
    step_through,
    to_machine,
    trim,
    validate,
    words_automaton,
)
from rbcm.semilinear import SemilinearSet, sls_member, unary_to_upset, upset_to_dfa


logger = logging.getLogger(__name__)

DECIDER_NOTE = (
    "Right quotient kept as a front-end DCM plus per-state semilinear tables; "
    "acceptor() gives an equivalent NCM that checks the tables at the end-marker."
)

_LETTER_POOL = "@%&*~^=+?!0123456789" + "ghijklmnopqrstuvwxyzGHIJKLMNOPQRSTUVWXYZ"


def _fresh_letters(alphabet, n):
    """``n`` single-character symbols outside ``alphabet``"""
    letters = [c for c in _LETTER_POOL if c not in alphabet and c != END][:n]
    if len(letters) < n:
        raise ValueError(f"no {n} spare symbols outside {sorted(alphabet)}")
    return tuple(letters)


def _require_dcm(m, what="construction"):
    if m.pushdown:
        raise TypeError(f"{what} does not handle stack machines")
    if not m.deterministic:
        raise ValueError(f"{what} needs a deterministic machine, got {m.kind}")
    problems = validate(m)
    if problems:
        raise ValueError(f"{what} got an invalid machine: {problems[0]}")


def _require_ncm(m, what="construction"):
    if m.pushdown:
        raise TypeError(f"{what} does not handle stack machines")


def _prepare(m):
    """Annotated, settled copy of a DCM: no reversal violations, no endless stays"""
    return settle_stay_loops(annotate_phases(m).machine)


def _put(values, i, value):
    return values[:i] + (value,) + values[i + 1:]


def _summary(what, m):
    logger.info(f"{what}: {m}")
    return m


@dataclass(frozen=True)
class _Segment:
    """Stretch of the input: ``real`` is read, ``guess`` invented, ``drain`` counts down"""

    kind: str
    readers: tuple


def _weave(tracks, plan, alphabet, guess, reversal_bound):
    """Nondeterministic product of ``tracks`` following ``plan``.

    Tracks read the symbols of every segment naming them, in lockstep, and
    process their end-marker after the last one. A ``drain`` segment must
    come last: it reads one real letter per unit in the counter of its
    single track and accepts once the counter is empty.

    Returns
    -------
    tuple
        ``(machine, labels)`` where ``labels`` maps each final state to the
        drained track's state (``None`` without a drain).
    """
    n = len(tracks)
    offsets = list(itertools.accumulate([0] + [t.counters for t in tracks]))
    lookahead = tuple(sorted(alphabet)) + (END,)
    guess = frozenset(guess)
    drained = {seg.readers[0] for seg in plan if seg.kind == "drain"}
    first = {i: min(s for s, seg in enumerate(plan) if i in seg.readers) for i in range(n)}
    last = {i: max(s for s, seg in enumerate(plan) if i in seg.readers) for i in range(n)}
    enders = {
        s: tuple(i for i in range(n) if last[i] == s and i not in drained)
        for s in range(len(plan))
    }
    zeros = (0,) * n

    def enter(s, states):
        if s == len(plan):
            return ("acc", None)
        seg = plan[s]
        if seg.kind == "drain":
            return ("drain", s, states[seg.readers[0]])
        return ("run", s, states, zeros, None)

    def leave(s, states, halted=zeros):
        if any(not halted[i] for i in enders[s]):
            return ("end", s, states, halted)
        return enter(s + 1, states)

    def follow(node):
        kind = node[0]
        if kind == "acc":
            return
        if kind == "drain":
            _, s, q = node
            i = plan[s].readers[0]
            for letter in sorted(alphabet):
                yield ((letter,), RIGHT, ((i, (1,), (-1,)),)), node
            yield ((END,), STAY, ((i, (0,), (0,)),)), ("acc", q)
            return
        if kind == "end":
            _, s, states, halted = node
            for i in enders[s]:
                if halted[i]:
                    continue
                m = tracks[i]
                for t in m.outgoing.get(states[i], ()):
                    if t.symbol == END:
                        succ = ("end", s, _put(states, i, t.target), halted)
                        yield (lookahead, STAY, ((i, t.status, t.delta),)), succ
                if states[i] in m.finals:
                    yield (lookahead, STAY, ()), leave(s, states, _put(halted, i, 1))
            return
        _, s, states, flags, look = node
        seg = plan[s]
        if not any(flags):
            yield (lookahead, STAY, ()), leave(s, states)
        for i in seg.readers:
            if flags[i] == 2:
                continue
            for t in tracks[i].outgoing.get(states[i], ()):
                if t.symbol == END:
                    continue
                if seg.kind == "real" and t.symbol not in alphabet:
                    continue
                if seg.kind == "guess" and t.symbol != (look or t.symbol):
                    continue
                if seg.kind == "guess" and t.symbol not in guess:
                    continue
                after = _put(flags, i, 2 if t.move == RIGHT else 1)
                done = all(after[j] == 2 for j in seg.readers)
                succ = (
                    "run",
                    s,
                    _put(states, i, t.target),
                    zeros if done else after,
                    None if done or seg.kind == "real" else t.symbol,
                )
                part = ((i, t.status, t.delta),)
                if seg.kind == "real":
                    yield ((t.symbol,), RIGHT if done else STAY, part), succ
                else:
                    yield (lookahead, STAY, part), succ

    def segment_of(node):
        return node[1] if node[0] != "acc" else len(plan)

    def status_options(node, parts):
        s = segment_of(node)
        fixed = {i: st for i, st, _ in parts}
        options = []
        for j, m in enumerate(tracks):
            if j in fixed:
                options.append([fixed[j]])
            elif s < first[j]:
                options.append([(0,) * m.counters])
            else:
                options.append(all_statuses(m.counters))
        for combo in itertools.product(*options):
            yield tuple(x for part in combo for x in part)

    def name(node):
        kind = node[0]
        if kind == "acc":
            return "acc" if node[1] is None else f"acc:{node[1]}"
        if kind == "drain":
            return f"{node[1]}d&{node[2]}"
        flags = "".join(map(str, node[3]))
        if kind == "end":
            return f"{node[1]}e&" + "&".join(node[2]) + f"&{flags}"
        return f"{node[1]}&" + "&".join(node[2]) + f"&{flags}&{node[4] or ''}"

    start = enter(0, tuple(t.initial for t in tracks))
    order, edges = _crawl(start, follow)
    transitions = []
    for src, (symbols, move, parts), dst in edges:
        delta = [0] * offsets[-1]
        for i, _, d in parts:
            delta[offsets[i]:offsets[i + 1]] = d
        for status in status_options(src, parts):
            for symbol in symbols:
                transitions.append(
                    Transition(name(src), symbol, status, name(dst), move, tuple(delta))
                )
    finals = [n for n in order if n[0] == "acc"]
    woven = CounterMachine(
        alphabet,
        {name(n) for n in order},
        name(start),
        {name(n) for n in finals},
        transitions,
        counters=offsets[-1],
        reversal_bound=reversal_bound,
    )
    woven = trim(woven)
    logger.debug(f"Woven {len(tracks)} tracks over {len(plan)} segments: {woven}")
    return woven, {name(n): n[1] for n in finals if name(n) in woven.states}


class FamilyHandle(ABC):
    """A language used as the fixed operand of a quotient.

    Every handle answers whether its language meets a regular set. Handles
    backed by a counter machine also provide the construction hooks used by
    the DCM quotients: ``right_image`` and ``left_images``.
    """

    machine = None
    universal = False

    def __init__(self, alphabet):
        self.alphabet = frozenset(alphabet)

    @abstractmethod
    def meets(self, dfa):
        """Whether the language shares a word with L(dfa)"""

    def _require_hooks(self):
        if self.machine is None:
            raise ValueError(f"{type(self).__name__} provides no construction hooks")

    def covers(self, alphabet):
        """Whether the language is every word over ``alphabet``"""
        return self.universal and set(alphabet) <= self.alphabet

    def right_image(self, annotation, state, letters):
        """Counter vectors at ``state`` from which some word of the family is accepted.

        Builds the checker machine that loads counter ``i`` with the number of
        ``letters[i]`` read, then guesses a word of the family while running
        the annotated machine from ``state``.

        Returns
        -------
        SemilinearSet
        """
        self._require_hooks()
        checker = _right_checker(annotation, state, letters, self)
        return ncm_parikh_bounded(checker, letters)

    def left_images(self, nf, letter):
        """Counter values left by words of the family, per control state.

        Returns
        -------
        dict
            Control state of ``nf.machine`` to ``UltimatelyPeriodicSet``.
        """
        self._require_hooks()
        checker, labels = _left_checker(nf, letter, self)
        slices = ncm_unary_extract_by_final(checker, letter)
        return {labels[q]: upset for q, (upset, _) in slices.items()}


class NCMFamily(FamilyHandle):
    """Language of a nondeterministic counter machine"""

    def __init__(self, machine):
        _require_ncm(machine, "NCMFamily")
        super().__init__(machine.alphabet)
        self.machine = machine

    def meets(self, dfa):
        product = restrict(self.machine, dfa)
        if product.counters == 0:
            return bool(trim(product).finals)
        return not ncm_emptiness(product)

    def __repr__(self):
        return f"NCMFamily({self.machine})"


class RegularFamily(FamilyHandle):
    """Language of a finite automaton"""

    def __init__(self, fa):
        super().__init__(fa.alphabet)
        self.automaton = minimize(fa)
        self.machine = to_machine(self.automaton)
        self.universal = dfa_algebra(
            "equivalent", self.automaton, sigma_star_automaton(fa.alphabet)
        )

    def meets(self, dfa):
        return bool(trim(restrict(self.machine, dfa)).finals)

    def __repr__(self):
        return f"RegularFamily({self.automaton})"


class PredicateFamily(FamilyHandle):
    """Opaque language known only through an emptiness-of-intersection oracle"""

    def __init__(self, alphabet, meets):
        super().__init__(alphabet)
        self._meets = meets

    def meets(self, dfa):
        return bool(self._meets(dfa))


def sigma_star(alphabet):
    return RegularFamily(sigma_star_automaton(alphabet))


def epsilon(alphabet):
    return RegularFamily(words_automaton([""], alphabet))


def nothing(alphabet):
    return RegularFamily(empty_automaton(alphabet))


def finite(words, alphabet):
    return RegularFamily(words_automaton(words, alphabet))


def as_family(operand):
    """Wrap a machine or automaton into a FamilyHandle"""
    if isinstance(operand, FamilyHandle):
        return operand
    if isinstance(operand, FiniteAutomaton):
        return RegularFamily(operand)
    if isinstance(operand, CounterMachine):
        return NCMFamily(operand)
    raise TypeError(f"cannot use {type(operand).__name__} as a language family")


def _loaded(annotation, state, letters):
    """The annotated machine rooted at ``state`` behind a counter loader.

    The loader reads ``letters[0]* letters[1]* ...`` and adds one to counter
    ``i`` per ``letters[i]``. Counters that never moved before ``state`` hold
    zero there and are not loaded.
    """
    m = annotation.machine
    k = m.counters
    _, phases = annotation.origin[state]
    if k == 0:
        return replace(m, initial=state)
    loads = []
    for i in range(k):
        loads.append(fresh(f"load{i}", m.states | set(loads)))
    zero = (0,) * k
    lookahead = sorted(m.alphabet) + [END]
    transitions = list(m.transitions)
    for i, (r, trend) in enumerate(phases):
        unit = tuple(int(j == i) for j in range(k))
        for status in all_statuses(k):
            if trend != 0:
                transitions.append(Transition(loads[i], letters[i], status, loads[i], RIGHT, unit))
            for j in range(i + 1, k):
                transitions.append(Transition(loads[i], letters[j], status, loads[j], STAY, zero))
            for z in lookahead:
                transitions.append(Transition(loads[i], z, status, state, STAY, zero))
    bound = 1
    for r, trend in phases:
        extra = {0: 0, 1: 0, -1: 1}[trend]
        bound = max(bound, m.reversal_bound - r + extra)
    return CounterMachine(
        m.alphabet | set(letters),
        m.states | set(loads),
        loads[0],
        m.finals,
        transitions,
        counters=k,
        reversal_bound=bound,
    )


def _right_checker(annotation, state, letters, family):
    """NCM over ``letters`` accepting the counter loads that admit a family suffix"""
    loaded = _loaded(annotation, state, letters)
    alphabet = annotation.machine.alphabet
    if family.covers(alphabet):
        tracks, guessers = [loaded], (0,)
    else:
        tracks, guessers = [loaded, family.machine], (0, 1)
    plan = [_Segment("real", (0,)), _Segment("guess", guessers)]
    bound = max(t.reversal_bound for t in tracks)
    checker, _ = _weave(tracks, plan, set(letters), alphabet, bound)
    return checker


def _left_checker(nf, letter, family):
    """Unary NCM accepting ``letter^i`` at ``acc:q`` iff a family word leaves ``nf`` in ``(q, i)``"""
    m = nf.machine
    if family.covers(m.alphabet):
        tracks, guessers, drained = [m], (0,), 0
    else:
        tracks, guessers, drained = [family.machine, m], (0, 1), 1
    plan = [_Segment("guess", guessers), _Segment("drain", (drained,))]
    bound = max(1, max(t.reversal_bound for t in tracks))
    return _weave(tracks, plan, {letter}, m.alphabet, bound)


def _front(m):
    """Annotation of a DCM plus its settled front-end without end-marker moves"""
    annotation = annotate_phases(m)
    settled = settle_stay_loops(annotation.machine)
    transitions = [t for t in settled.transitions if t.symbol != END]
    front = replace(settled, transitions=transitions, finals=frozenset())
    return annotation, front


def _boundary_states(front):
    """States a run can occupy right after consuming a symbol"""
    return sorted({front.initial} | {t.target for t in front.transitions if t.move == RIGHT})


def _right_tables(annotation, states, letters, family):
    tasks = [dask.delayed(family.right_image)(annotation, q, letters) for q in states]
    return dict(zip(states, dask.compute(*tasks)))


@dataclass(frozen=True)
class HybridDecider:
    """Deterministic front-end plus per-state semilinear acceptance tables.

    A word is accepted when the front-end consumes it without crashing and
    the counter vector it leaves belongs to the table entry of the state it
    stops in.
    """

    front: CounterMachine
    table: dict
    letters: tuple
    note: str = DECIDER_NOTE
    machine: CounterMachine = None

    def __post_init__(self):
        missing = sorted(self.front.states - set(self.table))
        if missing:
            raise ValueError(f"table misses front-end states {missing}")

    def _stop(self, word, start=None):
        return step_through(self.front, word, start=start)

    def accepts(self, word):
        conf = self._stop(word)
        if conf is None:
            return False
        return sls_member(self.table[conf.state], conf.counters)

    def language(self, max_len):
        """Accepted words up to ``max_len``, sharing work along prefixes"""
        symbols = sorted(self.front.alphabet)
        found = set()

        def visit(prefix, conf):
            if sls_member(self.table[conf.state], conf.counters):
                found.add(prefix)
            if len(prefix) == max_len:
                return
            for symbol in symbols:
                nxt = self._stop(symbol, start=replace(conf, cursor=0))
                if nxt is not None:
                    visit(prefix + symbol, nxt)

        start = self._stop("")
        if start is not None:
            visit("", start)
        return found

    def acceptor(self):
        """NCM for the same language: the front-end, then a table check at the end-marker.

        At the end-marker the machine picks a linear set of the table entry,
        subtracts any number of its periods and then its constant one unit
        at a time, and accepts on all-zero counters. The subtraction costs
        each counter at most one extra reversal.
        """
        front, k = self.front, self.front.counters
        states = set(front.states)
        transitions = list(front.transitions)
        accept = fresh("accept", states)
        states.add(accept)

        def chain(source, target, vector, label):
            """Unit decrements taking ``vector`` off the counters"""
            units = [i for i, v in enumerate(vector) for _ in range(v)]
            nodes = [source]
            for n in range(len(units) - 1):
                nodes.append(fresh(f"{label}.{n}", states))
                states.add(nodes[-1])
            nodes.append(target)
            for i, (a, b) in zip(units, zip(nodes, nodes[1:])):
                delta = tuple(-int(j == i) for j in range(k))
                for status in all_statuses(k):
                    if status[i]:
                        transitions.append(Transition(a, END, status, b, STAY, delta))

        for q in sorted(self.table):
            for j, linear in enumerate(self.table[q].components):
                hub = fresh(f"{q}?{j}", states)
                states.add(hub)
                for status in all_statuses(k):
                    transitions.append(Transition(q, END, status, hub, STAY, (0,) * k))
                for n, period in enumerate(linear.periods):
                    chain(hub, hub, period, f"{hub}+{n}")
                if any(linear.constant):
                    zero = fresh(f"{hub}=", states)
                    states.add(zero)
                    chain(hub, zero, linear.constant, f"{hub}-")
                else:
                    zero = hub
                transitions.append(Transition(zero, END, (0,) * k, accept, STAY, (0,) * k))
        return CounterMachine(
            front.alphabet,
            states,
            front.initial,
            {accept},
            transitions,
            counters=k,
            reversal_bound=front.reversal_bound + 1,
        )

    def __str__(self):
        supports = sum(len(s) for s in self.table.values())
        return f"HybridDecider over {self.front} with {supports} table supports"


def dcm_right_quotient_general(m1, family):
    """Right quotient L(m1) L(f)^-1 of a DCM with any counters.

    Parameters
    ----------
    m1 : CounterMachine
        Deterministic.
    family : FamilyHandle, CounterMachine or FiniteAutomaton
        Must provide the construction hooks.

    Returns
    -------
    HybridDecider
        With ``machine`` set to an equivalent DCM when ``m1`` has one counter.
    """
    _require_dcm(m1, "dcm_right_quotient_general")
    family = as_family(family)
    family._require_hooks()
    annotation, front = _front(m1)
    letters = _fresh_letters(m1.alphabet, m1.counters)
    candidates = [q for q in _boundary_states(front) if q in annotation.origin]
    table = _right_tables(annotation, candidates, letters, family)
    for q in front.states - set(table):
        table[q] = SemilinearSet.empty(m1.counters)
    lowered = None
    if m1.counters == 1:
        lowered = _glue_unary(annotation, front, table, candidates, letters[0])
    decider = HybridDecider(front, table, letters, machine=lowered)
    logger.info(f"Right quotient of {m1}: {decider}")
    return decider


def _determined(upset):
    """Whether membership is the same for every positive count"""
    values = {n in upset for n in range(1, upset.threshold + upset.period + 1)}
    return len(values) == 1


def _glue_unary(annotation, front, table, candidates, letter):
    """One-counter DCM: at the end-marker drain the counter through a unary DFA"""
    bound = annotation.machine.reversal_bound
    states = set(front.states)
    transitions = list(front.transitions)
    accept = fresh("accept", states)
    states.add(accept)
    for q in candidates:
        upset = unary_to_upset(table[q])
        if 0 in upset:
            transitions.append(Transition(q, END, (0,), accept, STAY, (0,)))
        if _determined(upset):
            if 1 in upset:
                transitions.append(Transition(q, END, (1,), accept, STAY, (0,)))
            continue
        (r, trend), = annotation.origin[q][1]
        if trend == 1 and r >= bound:
            raise RuntimeError(f"state {q} cannot drain its counter within {bound} reversals")
        dfa = upset_to_dfa(upset, letter)

        def name(s, q=q):
            return f"{q}~{s}"

        states |= {name(s) for s in dfa.states}
        first = dfa.step(dfa.initial, letter)
        if first is not None:
            transitions.append(Transition(q, END, (1,), name(first), STAY, (-1,)))
        for s in dfa.states:
            nxt = dfa.step(s, letter)
            if nxt is not None:
                transitions.append(Transition(name(s), END, (1,), name(nxt), STAY, (-1,)))
            if s in dfa.finals:
                transitions.append(Transition(name(s), END, (0,), accept, STAY, (0,)))
    glued = CounterMachine(
        front.alphabet,
        states,
        front.initial,
        {accept},
        transitions,
        counters=1,
        reversal_bound=bound,
        deterministic=True,
    )
    return trim(glued)


def dcm1_right_quotient(m1, m2):
    """Right quotient of a one-counter DCM by an NCM, as a one-counter DCM.

    Parameters
    ----------
    m1 : CounterMachine
        Deterministic, one counter, any reversal bound.
    m2 : CounterMachine, FiniteAutomaton or FamilyHandle

    Returns
    -------
    CounterMachine
    """
    if m1.counters != 1:
        raise ValueError(f"dcm1_right_quotient needs one counter, got {m1.counters}")
    decider = dcm_right_quotient_general(m1, m2)
    return _summary("Right quotient (one counter)", decider.machine)


def dcm_prefix(m):
    """Prefixes of L(m): a DCM for one counter, otherwise a HybridDecider"""
    _require_dcm(m, "dcm_prefix")
    if m.counters == 1:
        return dcm1_right_quotient(m, sigma_star(m.alphabet))
    return dcm_right_quotient_general(m, sigma_star(m.alphabet))


def _union(machines):
    """Lockstep product accepting when some component accepts.

    Components take their stay moves first, in order; a symbol is consumed
    once none has a stay left, moving every live component at once. Status
    combinations are explored abstractly: a decrement from a positive
    counter may leave it positive or empty.
    """
    parts = [_prepare(m) for m in machines]
    live = [
        [j for j in range(p.counters) if any(t.delta[j] for t in p.transitions)]
        for p in parts
    ]
    slots = list(itertools.accumulate([0] + [len(v) for v in live]))
    alphabet = frozenset().union(*(p.alphabet for p in parts))
    symbols = sorted(alphabet) + [END]

    def local(i, sigma):
        status = [0] * parts[i].counters
        for pos, j in enumerate(live[i]):
            status[j] = sigma[slots[i] + pos]
        return tuple(status)

    def global_delta(i, delta, into):
        for pos, j in enumerate(live[i]):
            into[slots[i] + pos] = delta[j]

    def successors(sigma, delta):
        options = []
        for s, d in zip(sigma, delta):
            if d == 1:
                options.append((1,))
            elif d == -1:
                options.append((0, 1))
            else:
                options.append((s,))
        return itertools.product(*options)

    def follow(node):
        control, sigma = node
        for z in symbols:
            stay = None
            for i, q in enumerate(control):
                if q is None:
                    continue
                options = parts[i].moves(q, z, local(i, sigma))
                if options and options[0].move == STAY:
                    stay = (i, options[0])
                    break
            delta = [0] * slots[-1]
            if stay is not None:
                i, t = stay
                global_delta(i, t.delta, delta)
                after = _put(control, i, t.target)
                move = STAY
            elif z == END:
                continue
            else:
                after = []
                for i, q in enumerate(control):
                    options = parts[i].moves(q, z, local(i, sigma)) if q is not None else ()
                    if options:
                        global_delta(i, options[0].delta, delta)
                        after.append(options[0].target)
                    else:
                        after.append(None)
                after = tuple(after)
                if all(q is None for q in after):
                    continue
                move = RIGHT
            for nxt in successors(sigma, delta):
                yield (z, sigma, move, tuple(delta), after), (after, nxt)

    def name(control):
        return "(" + ",".join("_" if q is None else q for q in control) + ")"

    start = (tuple(p.initial for p in parts), (0,) * slots[-1])
    order, edges = _crawl(start, follow)
    transitions = [
        Transition(name(src[0]), z, sigma, name(after), move, delta)
        for src, (z, sigma, move, delta, after), _ in edges
    ]
    controls = {n[0] for n in order}
    finals = {
        name(c) for c in controls if any(q in p.finals for q, p in zip(c, parts) if q)
    }
    union = CounterMachine(
        alphabet,
        {name(c) for c in controls},
        name(start[0]),
        finals,
        transitions,
        counters=slots[-1],
        reversal_bound=max(p.reversal_bound for p in parts),
        deterministic=True,
    )
    return union


def _complement(m):
    """Complement within the input alphabet, for a deterministic machine"""
    a = _prepare(m)
    k = a.counters
    zero = (0,) * k
    dead = fresh("dead", a.states)
    yes = fresh("yes", a.states | {dead})
    statuses = all_statuses(k)
    symbols = sorted(a.alphabet)
    transitions = []
    for q in sorted(a.states):
        for z in symbols:
            for s in statuses:
                options = a.moves(q, z, s)
                transitions += options or [Transition(q, z, s, dead, RIGHT, zero)]
        if q in a.finals:
            continue
        for s in statuses:
            options = a.moves(q, END, s)
            transitions += options or [Transition(q, END, s, yes, STAY, zero)]
    for s in statuses:
        transitions += [Transition(dead, z, s, dead, RIGHT, zero) for z in symbols]
        transitions.append(Transition(dead, END, s, yes, STAY, zero))
    return CounterMachine(
        a.alphabet,
        a.states | {dead, yes},
        a.initial,
        {yes},
        transitions,
        counters=k,
        reversal_bound=a.reversal_bound,
        deterministic=True,
    )


def _empty_dcm(alphabet, counters=1):
    return CounterMachine(
        alphabet, {"none"}, "none", set(), [], counters=counters, deterministic=True
    )


def dcm_boolean(op, *machines, dfa=None):
    """Boolean operations on deterministic counter machines.

    Parameters
    ----------
    op : {"union", "complement", "intersect_regular"}
    *machines : CounterMachine
        Deterministic; ``complement`` and ``intersect_regular`` take one.
    dfa : FiniteAutomaton, optional
        The regular operand of ``intersect_regular``.

    Returns
    -------
    CounterMachine
    """
    if not machines:
        raise ValueError(f"{op} needs at least one machine")
    for m in machines:
        _require_dcm(m, op)
    if op == "union":
        return _summary(f"Union of {len(machines)} machines", _union(machines))
    if len(machines) != 1:
        raise ValueError(f"{op} takes one machine, got {len(machines)}")
    if op == "complement":
        return _summary("Complement", _complement(machines[0]))
    if op == "intersect_regular":
        if dfa is None:
            raise ValueError("intersect_regular needs a dfa")
        return _summary("Intersection with a regular set", restrict(machines[0], dfa))
    raise ValueError(f"unknown boolean operation {op!r}")


def dcm_left_quotient_finite(words, m):
    """Left quotient of a DCM by a finite set of words.

    Each word is run to its configuration; a chain of stay moves loads the
    counters from zero before control passes to the reached state. The
    per-word machines are joined by ``dcm_boolean("union")``.
    """
    _require_dcm(m, "dcm_left_quotient_finite")
    a = _prepare(m)
    reached = set()
    for u in words:
        conf = step_through(a, u)
        if conf is not None:
            reached.add((conf.state, conf.counters))
    k = a.counters
    lookahead = sorted(a.alphabet) + [END]
    parts = []
    for state, counters in sorted(reached):
        loads = [i for i, c in enumerate(counters) for _ in range(c)]
        chain = []
        for step in range(len(loads)):
            chain.append(fresh(f"pre{step}", a.states | set(chain)))
        chain.append(state)
        transitions = list(a.transitions)
        values = [0] * k
        for step, i in enumerate(loads):
            status = tuple(1 if v else 0 for v in values)
            delta = tuple(int(j == i) for j in range(k))
            transitions += [
                Transition(chain[step], z, status, chain[step + 1], STAY, delta)
                for z in lookahead
            ]
            values[i] += 1
        parts.append(
            trim(replace(a, states=a.states | set(chain), initial=chain[0], transitions=transitions))
        )
    if not parts:
        return _summary("Left quotient by a finite set", _empty_dcm(m.alphabet, m.counters))
    return _summary("Left quotient by a finite set", dcm_boolean("union", *parts))


@dataclass(frozen=True)
class NormalForm:
    """A DCM(1,1) split into states before and after the first decrement.

    Acceptance only happens in ``accept``, entered on the end-marker with an
    empty counter; ``drain`` empties the counter first. ``dead_up`` and
    ``dead_down`` absorb every undefined move on a positive counter and are
    ``None`` when unreachable.
    """

    machine: CounterMachine
    up: frozenset
    down: frozenset
    accept: str
    drain: str
    dead_up: str
    dead_down: str
    source: CounterMachine

    def side(self, state):
        return "up" if state in self.up else "down"


def _require_dcm11(m, what):
    _require_dcm(m, what)
    if m.counters != 1 or m.reversal_bound > 1:
        raise ValueError(
            f"{what} needs a DCM(1,1), got {m.counters} counters and bound {m.reversal_bound}"
        )


def _compose_stays(transitions):
    """Replace neutral stays between down states by the move their chain ends in.

    The exception is the end-marker under an empty counter. Chains that loop
    or get stuck are dropped.
    """
    by_key = {(t.source, t.symbol, t.status): t for t in transitions}

    def neutral(t):
        return t.move == STAY and t.delta == (0,) and (t.symbol, t.status) != (END, (0,))

    result = []
    for t in transitions:
        if not neutral(t):
            result.append(t)
            continue
        seen = {t.source}
        nxt = t
        while nxt is not None and neutral(nxt) and nxt.target not in seen:
            seen.add(nxt.target)
            nxt = by_key.get((nxt.target, t.symbol, t.status))
        if nxt is None or neutral(nxt):
            continue
        result.append(replace(nxt, source=t.source))
    return result


def dcm11_normalize(m):
    """DCM(1,1) normal form with audited structure.

    Returns
    -------
    NormalForm
    """
    _require_dcm11(m, "dcm11_normalize")
    base = m.transitions
    if m.reversal_bound == 0:
        base = [t for t in base if t.delta != (-1,)]
    finals = m.finals

    def up(q):
        return f"{q}+"

    def down(q):
        return f"{q}-"

    names = {up(q) for q in m.states} | {down(q) for q in m.states}
    accept = fresh("accept", names)
    drain = fresh("drain", names | {accept})
    dead_up = fresh("dead+", names | {accept, drain})
    dead_down = fresh("dead-", names | {accept, drain, dead_up})
    zero, one = (0,), (1,)

    ups, downs = [], []
    for t in base:
        if t.symbol == END and t.source in finals:
            continue
        if t.delta == (-1,):
            ups.append(Transition(up(t.source), t.symbol, t.status, down(t.source), STAY, zero))
        else:
            ups.append(replace(t, source=up(t.source), target=up(t.target)))
        if t.delta != (1,):
            downs.append(replace(t, source=down(t.source), target=down(t.target)))
    for q in sorted(finals):
        ups.append(Transition(up(q), END, zero, accept, STAY, zero))
        ups.append(Transition(up(q), END, one, drain, STAY, zero))
        downs.append(Transition(down(q), END, zero, accept, STAY, zero))
        downs.append(Transition(down(q), END, one, drain, STAY, (-1,)))
    downs.append(Transition(drain, END, one, drain, STAY, (-1,)))
    downs.append(Transition(drain, END, zero, accept, STAY, zero))
    downs = _compose_stays(downs)

    up_states = {up(q) for q in m.states} | {dead_up}
    down_states = {down(q) for q in m.states} | {accept, drain, dead_down}
    transitions = ups + downs
    defined = {(t.source, t.symbol, t.status) for t in transitions}
    for q in sorted(up_states | down_states - {accept}):
        sink = dead_up if q in up_states else dead_down
        for z in sorted(m.alphabet):
            if (q, z, one) not in defined:
                transitions.append(Transition(q, z, one, sink, RIGHT, zero))
    for sink in (dead_up, dead_down):
        for z in sorted(m.alphabet):
            if (sink, z, zero) not in defined:
                transitions.append(Transition(sink, z, zero, sink, RIGHT, zero))

    forward = {}
    for t in transitions:
        forward.setdefault(t.source, set()).add(t.target)
    reach, _ = _crawl(up(m.initial), lambda q: ((None, r) for r in sorted(forward.get(q, ()))))
    reach = set(reach)
    normal = CounterMachine(
        m.alphabet,
        reach,
        up(m.initial),
        {accept} & reach,
        [t for t in transitions if t.source in reach],
        counters=1,
        reversal_bound=1,
        deterministic=True,
    )
    nf = NormalForm(
        normal,
        frozenset(up_states & reach),
        frozenset(down_states & reach),
        accept if accept in reach else None,
        drain if drain in reach else None,
        dead_up if dead_up in reach else None,
        dead_down if dead_down in reach else None,
        m,
    )
    logger.info(f"Normal form of {m}: {normal}")
    return nf


def _audit_partition(nf):
    m = nf.machine
    if nf.up & nf.down:
        yield f"states on both sides: {sorted(nf.up & nf.down)}"
    if nf.up | nf.down != m.states:
        yield f"states on neither side: {sorted(m.states - nf.up - nf.down)}"
    for special in (nf.accept, nf.drain, nf.dead_down):
        if special is not None and special not in nf.down:
            yield f"{special} must follow the first decrement"


def _audit_direction(nf):
    for t in nf.machine.transitions:
        if t.source in nf.up and t.delta == (-1,):
            yield f"{t.source} decrements before the first decrement"
        if t.source in nf.down and t.delta == (1,):
            yield f"{t.source} increments after a decrement"


def _audit_bridges(nf):
    for t in nf.machine.transitions:
        if t.source in nf.up and t.target in nf.down and (t.move, t.delta) != (STAY, (0,)):
            yield f"{t.source} -> {t.target} crosses sides without a neutral stay"
        if t.source in nf.down and t.target in nf.up:
            yield f"{t.source} -> {t.target} returns to the increasing side"


def _audit_down_stays(nf):
    for t in nf.machine.transitions:
        if t.source not in nf.down or t.move != STAY or t.delta != (0,):
            continue
        if (t.symbol, t.status) != (END, (0,)):
            yield f"{t.source} keeps a neutral stay on ({t.symbol}, {t.status})"


def _audit_total(nf):
    m = nf.machine
    for q in sorted(m.states - m.finals):
        for z in sorted(m.alphabet):
            if not m.moves(q, z, (1,)):
                yield f"{q} has no move on ({z}, 1)"


def _audit_empty_at_accept(nf):
    m = nf.machine
    if m.finals != ({nf.accept} if nf.accept else set()):
        yield f"finals {sorted(m.finals)} are not exactly the accept state"
    for t in m.transitions:
        if t.target in m.finals and (t.symbol, t.status, t.move, t.delta) != (
            END,
            (0,),
            STAY,
            (0,),
        ):
            yield f"{t.source} enters {t.target} outside an empty end-marker stay"


def _audit_final_shape(nf):
    m = nf.machine
    for t in m.transitions:
        if t.source in m.finals:
            yield f"final {t.source} still moves on {t.symbol}"
    if m.initial in m.finals:
        yield "the initial state is final"


NORMAL_FORM_AUDITS = (
    _audit_partition,
    _audit_direction,
    _audit_bridges,
    _audit_down_stays,
    _audit_total,
    _audit_empty_at_accept,
    _audit_final_shape,
)


def audit_normal_form(nf):
    """Failed conditions as ``(number, message)`` pairs, numbered from 1"""
    failures = []
    for number, audit in enumerate(NORMAL_FORM_AUDITS, start=1):
        failures += [(number, message) for message in audit(nf)]
    return failures


def _configuration_dfa(slices, letter):
    """Complete DFA over control states and ``letter`` for ``{q letter^i}``"""
    start = "c:start"
    states, edges, finals = {start}, [], set()
    alphabet = set(slices) | {letter}
    for q, upset in sorted(slices.items()):
        if upset.is_empty:
            continue
        dfa = upset_to_dfa(upset, letter)

        def name(s, q=q):
            return f"{q}:{s}"

        states |= {name(s) for s in dfa.states}
        finals |= {name(s) for s in dfa.finals}
        edges.append((start, q, name(dfa.initial)))
        edges += [(name(a), x, name(b)) for a, x, b in dfa.edges]
    return complete(FiniteAutomaton(alphabet, states, start, finals, edges, True))


def _positive(upset):
    return any(n > 0 for n in upset.explicit) or bool(upset.residues)


def _descent(nf, mc, origin, entry, letter):
    """DFA for the words ``nf`` accepts from ``entry`` with a counter ``i`` such that
    ``origin letter^i`` is accepted by ``mc`` and ``i > 0``.

    Each decrement advances ``mc`` by one letter; the run guesses when the
    counter reaches zero, which must land on a final state of ``mc``.
    """
    m = nf.machine
    d0 = mc.step(mc.initial, origin)

    def follow(node):
        p, d, empty = node
        for t in m.outgoing.get(p, ()):
            if not empty and t.status == (1,):
                if t.delta == (-1,):
                    after = mc.step(d, letter)
                    yield t, (t.target, after, False)
                    if after in mc.finals:
                        yield t, (t.target, after, True)
                else:
                    yield t, (t.target, d, False)
            elif empty and t.status == (0,):
                yield t, (t.target, d, True)

    start = (entry, d0, False)
    order, edges = _crawl(start, follow)

    def name(node):
        return f"{node[0]}/{node[1]}/{int(node[2])}"

    counterless = CounterMachine(
        m.alphabet,
        {name(n) for n in order},
        name(start),
        {name(n) for n in order if n[2] and n[0] in m.finals},
        [
            Transition(name(a), t.symbol, (), name(b), t.move, ())
            for a, t, b in edges
        ],
        counters=0,
    )
    return minimize(determinize(counterless_to_nfa(counterless)))


def _ascent(nf, mc, entry, letter, descents):
    """One-counter DCM for the words ``nf`` accepts from ``entry`` with a
    positive counter allowed by ``mc``.

    The own counter holds the increments made after ``entry``; once it is
    spent on the decreasing side, control passes to the descent DFA of the
    state reached.
    """
    m = nf.machine
    lookahead = sorted(m.alphabet) + [END]

    def follow(node):
        if node[0] == "dfa":
            _, r, s = node
            dfa = descents[r]
            for z in sorted(m.alphabet):
                nxt = dfa.step(s, z)
                if nxt is not None:
                    yield Transition(None, z, (0,), None, RIGHT, (0,)), ("dfa", r, nxt)
            return
        _, p = node
        if p in nf.up:
            for t in m.outgoing.get(p, ()):
                if t.status != (1,):
                    continue
                for own in ((0,), (1,)):
                    yield replace(t, status=own), ("sim", t.target)
            return
        for t in m.outgoing.get(p, ()):
            if t.status == (1,):
                yield t, ("sim", t.target)
        if p not in descents:
            descents[p] = _descent(nf, mc, entry, p, letter)
        for z in lookahead:
            yield Transition(None, z, (0,), None, STAY, (0,)), ("dfa", p, descents[p].initial)

    start = ("sim", entry)
    order, edges = _crawl(start, follow)

    def name(node):
        return node[1] if node[0] == "sim" else f"{node[1]}/{node[2]}"

    finals = {name(n) for n in order if n[0] == "dfa" and n[2] in descents[n[1]].finals}
    ascent = CounterMachine(
        m.alphabet,
        {name(n) for n in order},
        name(start),
        finals,
        [replace(t, source=name(a), target=name(b)) for a, t, b in edges],
        counters=1,
        reversal_bound=1,
        deterministic=True,
    )
    return trim(ascent)


@dataclass(frozen=True)
class ComponentUnion:
    """Finitely many DCM(1,1) components whose union is the language.

    ``components`` pairs a ``(kind, state)`` label with each machine, where
    kind is ``"zero"`` (start with an empty counter), ``"up"`` (positive
    counter, still increasing) or ``"down"`` (positive counter, decreasing;
    merged into one finite-state component).
    """

    alphabet: frozenset
    components: tuple
    normal_form: NormalForm = None
    configurations: FiniteAutomaton = None
    letter: str = None
    slices: dict = field(default_factory=dict)

    @property
    def machines(self):
        return [m for _, m in self.components]

    @cached_property
    def combined(self):
        """All components in one multi-counter DCM"""
        if not self.components:
            return _empty_dcm(self.alphabet)
        return dcm_boolean("union", *self.machines)

    @property
    def counters(self):
        """Counters the combined machine needs, one per moving component counter"""
        return sum(
            1 for m in self.machines for j in range(m.counters)
            if any(t.delta[j] for t in m.transitions)
        )

    def accepts(self, word):
        return any(run_word(m, word).accepted for m in self.machines)

    def language(self, max_len, within=None):
        words = set()
        for m in self.machines:
            words |= enumerate_language(m, max_len, within=within).require_exact()
        return words

    def __str__(self):
        return f"ComponentUnion of {len(self.components)} DCM(1,1) components"


def dcm11_left_quotient(f, m):
    """Left quotient L(f)^-1 L(m) of a DCM(1,1) by an NCM.

    The configurations ``(q, i)`` reachable on words of ``f`` form a regular
    set ``{q a^i}``. Each such configuration contributes the language of the
    normal form from there; those contributions are grouped into finitely
    many DCM(1,1) components.

    Returns
    -------
    ComponentUnion
    """
    _require_dcm11(m, "dcm11_left_quotient")
    family = as_family(f)
    nf = dcm11_normalize(m)
    n = nf.machine
    letter = _fresh_letters(n.alphabet, 1)[0]
    slices = family.left_images(nf, letter)
    for q in n.states:
        slices.setdefault(q, unary_to_upset(SemilinearSet.empty(1)))
    mc = _configuration_dfa(slices, letter)

    components = []
    for q in sorted(n.states):
        if 0 in slices[q]:
            zero = trim(replace(n, initial=q))
            if zero.finals:
                components.append((("zero", q), zero))

    ups = [q for q in sorted(nf.up) if _positive(slices[q])]
    downs = [q for q in sorted(nf.down) if _positive(slices[q])]
    tasks = [dask.delayed(_ascent)(nf, mc, q, letter, {}) for q in ups]
    tasks += [dask.delayed(_descent)(nf, mc, q, q, letter) for q in downs]
    built = dask.compute(*tasks)
    for q, machine in zip(ups, built[: len(ups)]):
        if machine.finals:
            components.append((("up", q), machine))
    merged = None
    for dfa in built[len(ups):]:
        merged = dfa if merged is None else minimize(dfa_algebra("union", merged, dfa))
    if merged is not None and merged.finals:
        components.append((("down", "*"), to_machine(merged, counters=1)))

    union = ComponentUnion(m.alphabet, tuple(components), nf, mc, letter, slices)
    logger.info(f"Left quotient of {m} by {family!r}: {union}")
    return union


def dcm11_suffix_infix(m, which):
    """Suffixes or infixes of a DCM(1,1) language as a ComponentUnion"""
    _require_dcm11(m, "dcm11_suffix_infix")
    suffixes = dcm11_left_quotient(sigma_star(m.alphabet), m)
    if which == "suffix":
        return suffixes
    if which != "infix":
        raise ValueError(f"expected 'suffix' or 'infix', got {which!r}")
    return _right_each(suffixes, sigma_star(m.alphabet))


def _right_each(union, family):
    tasks = [dask.delayed(dcm1_right_quotient)(c, family) for c in union.machines]
    quotients = dask.compute(*tasks)
    components = tuple(
        (label, q) for (label, _), q in zip(union.components, quotients) if q.finals
    )
    return replace(union, components=components)


def dcm11_two_sided_quotient(f1, m, f2, order="left-first"):
    """``L(f1)^-1 L(m) L(f2)^-1`` as a ComponentUnion, in either order"""
    _require_dcm11(m, "dcm11_two_sided_quotient")
    if order == "left-first":
        return _right_each(dcm11_left_quotient(f1, m), as_family(f2))
    if order == "right-first":
        return dcm11_left_quotient(f1, dcm1_right_quotient(m, f2))
    raise ValueError(f"expected 'left-first' or 'right-first', got {order!r}")


def ncm_quotient(side, m1, m2):
    """Left or right quotient of NCM languages, as an NCM.

    ``right`` accepts ``x`` when some ``y`` in L(m2) makes ``xy`` accepted by
    ``m1``; ``left`` accepts ``y`` when some ``x`` in L(m2) does. The split
    word is guessed and read by both machines.
    """
    _require_ncm(m1, "ncm_quotient")
    _require_ncm(m2, "ncm_quotient")
    if side == "right":
        plan = [_Segment("real", (0,)), _Segment("guess", (0, 1))]
    elif side == "left":
        plan = [_Segment("guess", (0, 1)), _Segment("real", (0,))]
    else:
        raise ValueError(f"expected 'left' or 'right', got {side!r}")
    bound = max(m1.reversal_bound, m2.reversal_bound)
    woven, _ = _weave([m1, m2], plan, m1.alphabet, m1.alphabet, bound)
    return _summary(f"{side.capitalize()} quotient", woven)


def ncm_word_ops(op, m, gaps=1):
    """Prefix, suffix, infix, outfix or ``gaps``-embedding closure of L(m).

    The embedding keeps ``gaps + 1`` visible segments and guesses the
    ``gaps`` deleted ones in between; ``outf`` is the one-gap embedding.
    """
    _require_ncm(m, "ncm_word_ops")
    real, guess = _Segment("real", (0,)), _Segment("guess", (0,))
    if op == "pref":
        plan = [real, guess]
    elif op == "suff":
        plan = [guess, real]
    elif op == "infx":
        plan = [guess, real, guess]
    elif op in ("outf", "emb"):
        gaps = 1 if op == "outf" else gaps
        if gaps < 0:
            raise ValueError(f"gaps must be nonnegative, got {gaps}")
        plan = [real] + [guess, real] * gaps
    else:
        raise ValueError(f"unknown word operation {op!r}")
    woven, _ = _weave([m], plan, m.alphabet, m.alphabet, m.reversal_bound)
    return _summary(f"{op} closure", woven)


def regular_quotient_by_family(side, r, f):
    """Quotient of a regular language by any family with emptiness of intersection.

    Returns
    -------
    FiniteAutomaton
        A DFA over the alphabet of ``r``.
    """
    family = as_family(f)
    dfa = r if r.deterministic else determinize(r)
    states = sorted(dfa.states)
    if side == "right":
        rooted = [replace(dfa, initial=q) for q in states]
    elif side == "left":
        rooted = [replace(dfa, finals={q}) for q in states]
    else:
        raise ValueError(f"expected 'left' or 'right', got {side!r}")
    hits = dask.compute(*[dask.delayed(family.meets)(p) for p in rooted])
    marked = {q for q, hit in zip(states, hits) if hit}
    if side == "right":
        result = replace(dfa, finals=marked)
    else:
        start = fresh("start", dfa.states)
        result = FiniteAutomaton(
            dfa.alphabet,
            dfa.states | {start},
            start,
            dfa.finals,
            list(dfa.edges) + [(start, None, q) for q in sorted(marked)],
        )
    quotient = minimize(result)
    logger.info(f"Regular {side} quotient by {family!r}: {quotient}")
    return quotient
