"""Named machines, transcript machines and bounded demonstrations.

Every catalog entry pairs a builder with a word predicate describing the
language it should accept, so fingerprints can be checked against an
independent oracle rather than a stored hash.
"""

import hashlib
import itertools
import logging
import re
from dataclasses import dataclass, field

import numpy as np

from rbcm.closures import dcm11_suffix_infix, dcm_boolean
from rbcm.machines import (
    END,
    RIGHT,
    STAY,
    CounterMachine,
    FiniteAutomaton,
    PushdownCounterMachine,
    Transition,
    all_statuses,
    canonical,
    enumerate_language,
    run_word,
    validate,
)


logger = logging.getLogger(__name__)

OPEN, CLOSE = "[", "]"
TRANSCRIPT_MARK = "$"
_LABEL_POOL = "0123456789ABCDEFGHIJKLMNOPQRSTUVWXYZghijklmnopqrstuvwxyz"


def _rows(rows, counters):
    """Transitions from ``(src, sym, status, dst, move, delta[, top, action])`` rows.

    ``status`` may be ``None`` to mean every status.
    """
    out = []
    for row in rows:
        src, sym, status, dst, move, delta, *stack = row
        statuses = all_statuses(counters) if status is None else [status]
        for s in statuses:
            out.append(Transition(src, sym, s, dst, move, delta, *stack))
    return out


def _machine(alphabet, initial, finals, rows, counters=1, reversal_bound=1,
             deterministic=True, **stack):
    transitions = _rows(rows, counters)
    states = {initial} | set(finals)
    states |= {t.source for t in transitions} | {t.target for t in transitions}
    cls = PushdownCounterMachine if stack else CounterMachine
    m = cls(
        alphabet,
        states,
        initial,
        finals,
        transitions,
        counters=counters,
        reversal_bound=reversal_bound,
        deterministic=deterministic,
        **stack,
    )
    problems = validate(m)
    if problems:
        raise ValueError(f"gallery machine is invalid: {problems[0]}")
    return m


def anbn():
    """{a^n b^n | n >= 1}: count the a's, then cancel one per b"""
    return _machine(
        "ab",
        "s",
        {"acc"},
        [
            ("s", "a", (0,), "A", RIGHT, (1,)),
            ("A", "a", (1,), "A", RIGHT, (1,)),
            ("A", "b", (1,), "B", RIGHT, (-1,)),
            ("B", "b", (1,), "B", RIGHT, (-1,)),
            ("B", END, (0,), "acc", STAY, (0,)),
        ],
    )


def anb2n():
    """{a^n b^2n | n >= 1}; each a counts twice, the second unit on a stay move"""
    rows = [("s", "a", (0,), "P", RIGHT, (1,))]
    rows += [("P", z, (1,), "A", STAY, (1,)) for z in "ab"]
    rows += [
        ("A", "a", (1,), "P", RIGHT, (1,)),
        ("A", "b", (1,), "B", RIGHT, (-1,)),
        ("B", "b", (1,), "B", RIGHT, (-1,)),
        ("B", END, (0,), "acc", STAY, (0,)),
    ]
    return _machine("ab", "s", {"acc"}, rows)


def _embed(m, prefix):
    return [
        (f"{prefix}{t.source}", t.symbol, t.status, f"{prefix}{t.target}", t.move, t.delta)
        for t in m.transitions
    ]


def hash_dollar():
    """{#a^n b^n | n > 0} union {$a^n b^2n | n > 0} as one DCM(1,1)"""
    left, right = anbn(), anb2n()
    rows = [
        ("s", "#", (0,), f"x.{left.initial}", RIGHT, (0,)),
        ("s", "$", (0,), f"y.{right.initial}", RIGHT, (0,)),
    ]
    rows += _embed(left, "x.") + _embed(right, "y.")
    finals = {f"x.{q}" for q in left.finals} | {f"y.{q}" for q in right.finals}
    return _machine("ab#$", "s", finals, rows)


def anbncn():
    """{a^n b^n c^n | n >= 0} with two one-reversal counters"""
    return _machine(
        "abc",
        "s",
        {"acc"},
        [
            ("s", END, (0, 0), "acc", STAY, (0, 0)),
            ("s", "a", (0, 0), "A", RIGHT, (1, 0)),
            ("A", "a", (1, 0), "A", RIGHT, (1, 0)),
            ("A", "b", (1, 0), "B", RIGHT, (-1, 1)),
            ("B", "b", (1, 1), "B", RIGHT, (-1, 1)),
            ("B", "c", (0, 1), "C", RIGHT, (0, -1)),
            ("C", "c", (0, 1), "C", RIGHT, (0, -1)),
            ("C", END, (0, 0), "acc", STAY, (0, 0)),
        ],
        counters=2,
    )


def abab_3rev():
    """{a^n b^n a^m b^m | n, m >= 1}: one counter reused, three reversals"""
    return _machine(
        "ab",
        "s",
        {"acc"},
        [
            ("s", "a", (0,), "A1", RIGHT, (1,)),
            ("A1", "a", (1,), "A1", RIGHT, (1,)),
            ("A1", "b", (1,), "B1", RIGHT, (-1,)),
            ("B1", "b", (1,), "B1", RIGHT, (-1,)),
            ("B1", "a", (0,), "A2", RIGHT, (1,)),
            ("A2", "a", (1,), "A2", RIGHT, (1,)),
            ("A2", "b", (1,), "B2", RIGHT, (-1,)),
            ("B2", "b", (1,), "B2", RIGHT, (-1,)),
            ("B2", END, (0,), "acc", STAY, (0,)),
        ],
        reversal_bound=3,
    )


def distinct_k(k=2):
    """{x1 # x2 | x1, x2 in {a,b}+, x1 != x2} with one counter.

    One branch compares lengths. The other guesses a position in ``x1``,
    stores its index in the counter and its symbol in the state, then counts
    down through ``x2`` to the same position and requires another symbol.
    """
    if k != 2:
        raise ValueError(f"distinct_k is built for two blocks, got {k}")
    ab = "ab"
    rows = []
    # length branch
    rows += [("s", z, (0,), "L1", RIGHT, (1,)) for z in ab]
    rows += [("L1", z, (1,), "L1", RIGHT, (1,)) for z in ab]
    rows += [("L1", "#", (1,), "L2", RIGHT, (0,))]
    rows += [("L2", z, (1,), "L3", RIGHT, (-1,)) for z in ab]
    rows += [("L3", z, (1,), "L3", RIGHT, (-1,)) for z in ab]
    rows += [("L3", END, (1,), "acc", STAY, (0,))]
    rows += [("L3", z, (0,), "L4", RIGHT, (0,)) for z in ab]
    rows += [("L4", z, (0,), "L4", RIGHT, (0,)) for z in ab]
    rows += [("L4", END, (0,), "acc", STAY, (0,))]
    # position branch
    rows += [("s", z, (0,), "P", STAY, (0,)) for z in ab]
    for z in ab:
        rows += [("P", z, None, "P", RIGHT, (1,))]
        rows += [("P", z, None, f"Q{z}", RIGHT, (0,))]
        rows += [(f"Q{z}", y, None, f"Q{z}", RIGHT, (0,)) for y in ab]
        rows += [(f"Q{z}", "#", None, f"D{z}", RIGHT, (0,))]
        rows += [(f"D{z}", y, (1,), f"D{z}", RIGHT, (-1,)) for y in ab]
        rows += [(f"D{z}", y, (0,), "E", RIGHT, (0,)) for y in ab if y != z]
    rows += [("E", z, (0,), "E", RIGHT, (0,)) for z in ab]
    rows += [("E", END, (0,), "acc", STAY, (0,))]
    return _machine("ab#", "s", {"acc"}, rows, deterministic=False)


def anbn_or_anb2n():
    """{a^n b^n} union {a^n b^2n}, n >= 1, guessing the branch on the first a"""
    rows = [
        ("s", "a", (0,), "A", RIGHT, (1,)),
        ("A", "a", (1,), "A", RIGHT, (1,)),
        ("A", "b", (1,), "B", RIGHT, (-1,)),
        ("B", "b", (1,), "B", RIGHT, (-1,)),
        ("B", END, (0,), "acc", STAY, (0,)),
        ("s", "a", (0,), "A2", RIGHT, (1,)),
        ("A2", "a", (1,), "A2", RIGHT, (1,)),
        ("A2", "b", (1,), "H", RIGHT, (0,)),
        ("H", "b", (1,), "G", RIGHT, (-1,)),
        ("G", "b", (1,), "H", RIGHT, (0,)),
        ("G", END, (0,), "acc", STAY, (0,)),
    ]
    return _machine("ab", "s", {"acc"}, rows, deterministic=False)


def marked_palindrome_count():
    """{x # x^R | x in {a,b}+, |x|_a > |x|_b} as a DPCM(2,1).

    ``x`` goes on the stack while the counters tally a's and b's; after
    the marker the stack is matched against ``x^R`` and the counters are
    decremented together at the end-marker.
    """
    tops = ["Z", "a", "b"]
    rows = []
    for q in ("P", "P1"):
        for top in tops:
            rows.append((q, "a", None, "P1", RIGHT, (1, 0), top, "push:a"))
            rows.append((q, "b", None, "P1", RIGHT, (0, 1), top, "push:b"))
    rows += [("P1", "#", None, "Q", RIGHT, (0, 0), top, "noop") for top in tops]
    rows += [
        ("Q", "a", None, "Q", RIGHT, (0, 0), "a", "pop"),
        ("Q", "b", None, "Q", RIGHT, (0, 0), "b", "pop"),
        ("Q", END, None, "K", STAY, (0, 0), "Z", "noop"),
        ("K", END, (1, 1), "K", STAY, (-1, -1), "Z", "noop"),
        ("K", END, (1, 0), "acc", STAY, (0, 0), "Z", "noop"),
    ]
    return _machine(
        "ab#", "P", {"acc"}, rows, counters=2, stack_alphabet={"a", "b"}, bottom="Z"
    )


def _pattern_dcm(name):
    """The one-counter pieces of the suffix counterexample over {a,b,c}"""
    if name == "L1":  # a^n b^n c^k
        rows = [
            ("s", END, (0,), "acc", STAY, (0,)),
            ("s", "a", (0,), "A", RIGHT, (1,)),
            ("s", "c", (0,), "C", RIGHT, (0,)),
            ("A", "a", (1,), "A", RIGHT, (1,)),
            ("A", "b", (1,), "B", RIGHT, (-1,)),
            ("B", "b", (1,), "B", RIGHT, (-1,)),
            ("B", "c", (0,), "C", RIGHT, (0,)),
            ("B", END, (0,), "acc", STAY, (0,)),
            ("C", "c", (0,), "C", RIGHT, (0,)),
            ("C", END, (0,), "acc", STAY, (0,)),
        ]
    elif name == "L2":  # a^n b^m c^m
        rows = [
            ("s", END, (0,), "acc", STAY, (0,)),
            ("s", "a", (0,), "s", RIGHT, (0,)),
            ("s", "b", (0,), "B", RIGHT, (1,)),
            ("B", "b", (1,), "B", RIGHT, (1,)),
            ("B", "c", (1,), "C", RIGHT, (-1,)),
            ("C", "c", (1,), "C", RIGHT, (-1,)),
            ("C", END, (0,), "acc", STAY, (0,)),
        ]
    elif name == "L3":  # a* b* c*
        rows = [("s", END, (0,), "acc", STAY, (0,))]
        rows += [("s", "a", (0,), "s", RIGHT, (0,)), ("s", "b", (0,), "B", RIGHT, (0,))]
        rows += [("s", "c", (0,), "C", RIGHT, (0,)), ("B", "b", (0,), "B", RIGHT, (0,))]
        rows += [("B", "c", (0,), "C", RIGHT, (0,)), ("C", "c", (0,), "C", RIGHT, (0,))]
        rows += [("B", END, (0,), "acc", STAY, (0,)), ("C", END, (0,), "acc", STAY, (0,))]
    else:
        raise ValueError(f"unknown pattern {name!r}")
    return _machine("abc", "s", {"acc"}, rows)


def _framed(parts):
    """Marked union ``g [ L(m) ]`` over the pairs ``(g, m)``, sharing one counter.

    The inner end-marker becomes ``]``: stay moves on it are kept, and a
    final state reading it moves on to the accepting ``close``.
    """
    alphabet = set().union(*(m.alphabet for _, m in parts)) | {g for g, _ in parts}
    alphabet |= {OPEN, CLOSE}
    rows = []
    for g, m in parts:
        p = f"{g}."
        rows.append(("s", g, (0,), f"{p}open", RIGHT, (0,)))
        rows.append((f"{p}open", OPEN, (0,), f"{p}{m.initial}", RIGHT, (0,)))
        for t in m.transitions:
            if t.symbol != END:
                rows.append((f"{p}{t.source}", t.symbol, t.status, f"{p}{t.target}", t.move, t.delta))
            elif t.source not in m.finals:
                rows.append((f"{p}{t.source}", CLOSE, t.status, f"{p}{t.target}", STAY, t.delta))
        for q in m.finals:
            rows.append((f"{p}{q}", CLOSE, None, "close", RIGHT, (0,)))
    return _machine(alphabet, "s", {"close"}, rows)


def suff11_family():
    """Languages behind the DCM(1,1) suffix counterexample.

    ``L`` is {a^n b^n c^n}, the intersection of ``L1``, ``L2`` and ``L3``;
    ``L'`` marks the complements of the three as ``d[~L1]``, ``e[~L2]``
    and ``f[~L3]`` in a single one-counter DCM. The brackets ``[`` and ``]``
    stand for the delimiters usually written #1 and #2, and ``d``, ``e``,
    ``f`` select the piece, so the alphabet of ``L'`` is
    exactly {a, b, c, d, e, f, [, ]}.
    """
    pieces = {name: _pattern_dcm(name) for name in ("L1", "L2", "L3")}
    complements = [
        (g, dcm_boolean("complement", pieces[name]))
        for g, name in zip("def", ("L1", "L2", "L3"))
    ]
    return {"L": anbncn(), **pieces, "L'": _framed(complements)}


def dpda1_quotient_pair():
    """A one-turn DPDA language and a DCM(2,1) language for the quotient demo.

    ``L1`` is {d^l c^k b^j a^i # a^i b^j c^k d^l | i, j, k, l > 0} and
    ``L2`` is {a^i b^j c^i d^j | i, j > 0}.
    """
    push = [("D", "d", "Z", "D1"), ("D1", "d", "d", "D1"), ("D1", "c", "d", "C1"),
            ("C1", "c", "c", "C1"), ("C1", "b", "c", "B1"), ("B1", "b", "b", "B1"),
            ("B1", "a", "b", "A1"), ("A1", "a", "a", "A1")]
    rows = [(src, sym, (), dst, RIGHT, (), top, f"push:{sym}") for src, sym, top, dst in push]
    rows.append(("A1", "#", (), "H", RIGHT, (), "a", "noop"))
    rows += [("H", z, (), "H", RIGHT, (), z, "pop") for z in "abcd"]
    rows.append(("H", END, (), "acc", STAY, (), "Z", "noop"))
    l1 = _machine(
        "abcd#", "D", {"acc"}, rows, counters=0, stack_alphabet=set("abcd"), bottom="Z"
    )
    l2 = _machine(
        "abcd",
        "s",
        {"acc"},
        [
            ("s", "a", (0, 0), "A", RIGHT, (1, 0)),
            ("A", "a", (1, 0), "A", RIGHT, (1, 0)),
            ("A", "b", (1, 0), "B", RIGHT, (0, 1)),
            ("B", "b", (1, 1), "B", RIGHT, (0, 1)),
            ("B", "c", (1, 1), "C", RIGHT, (-1, 0)),
            ("C", "c", (1, 1), "C", RIGHT, (-1, 0)),
            ("C", "d", (0, 1), "D", RIGHT, (0, -1)),
            ("D", "d", (0, 1), "D", RIGHT, (0, -1)),
            ("D", END, (0, 0), "acc", STAY, (0, 0)),
        ],
        counters=2,
    )
    return {"L1": l1, "L2": l2}


def unary_pattern(head, up, down):
    """{a^(head + (up + down) n) | n >= 0} through one counter.

    Every ``up`` a's add a unit, a guessed switch starts the descent, and
    every ``down`` a's remove one.
    """
    if up < 1 or down < 1 or head < 0:
        raise ValueError(f"need up, down >= 1 and head >= 0, got {head}, {up}, {down}")
    rows = [(f"H{i}", "a", (0,), f"H{i + 1}", RIGHT, (0,)) for i in range(head)]
    rows.append((f"H{head}", "a", (0,), "U0", STAY, (0,)))
    rows.append((f"H{head}", END, (0,), "U0", STAY, (0,)))
    for i in range(up):
        delta = (1,) if i == up - 1 else (0,)
        rows.append((f"U{i}", "a", None, f"U{(i + 1) % up}", RIGHT, delta))
    rows.append(("U0", "a", (1,), "D0", STAY, (0,)))
    for j in range(down):
        delta = (-1,) if j == down - 1 else (0,)
        rows.append((f"D{j}", "a", (1,), f"D{(j + 1) % down}", RIGHT, delta))
    rows += [("U0", END, (0,), "acc", STAY, (0,)), ("D0", END, (0,), "acc", STAY, (0,))]
    return _machine("a", "H0", {"acc"}, rows, deterministic=False)


def unary_machines():
    """Small unary NCMs with their languages as predicates on ``n``"""
    shapes = [(0, 1, 1), (1, 1, 1), (0, 1, 2), (2, 2, 1), (3, 1, 3), (1, 2, 2)]
    catalog = []
    for head, up, down in shapes:
        period = up + down
        catalog.append(
            (
                f"unary_{head}_{up}_{down}",
                unary_pattern(head, up, down),
                lambda n, h=head, p=period: n >= h and (n - h) % p == 0,
            )
        )
    return catalog


def random_machine(seed, states=4, counters=1, alphabet="ab", transitions=10,
                   reversal_bound=1):
    """Seeded random NCM; always valid, usually small enough to analyse exactly"""
    rng = np.random.default_rng(seed)
    names = [f"q{i}" for i in range(states)]
    symbols = sorted(alphabet) + [END]
    rows = []
    for _ in range(transitions):
        src, dst = rng.choice(names, size=2)
        symbol = symbols[rng.integers(len(symbols))]
        status = tuple(int(s) for s in rng.integers(0, 2, size=counters))
        delta = tuple(
            int(rng.integers(0 if s == 0 else -1, 2)) for s in status
        )
        move = STAY if symbol == END or rng.random() < 0.2 else RIGHT
        rows.append((str(src), symbol, status, str(dst), move, delta))
    finals = {str(q) for q in rng.choice(names, size=max(1, states // 3), replace=False)}
    return _machine(
        alphabet,
        names[0],
        finals,
        rows,
        counters=counters,
        reversal_bound=reversal_bound,
        deterministic=False,
    )


@dataclass(frozen=True)
class Transcript:
    """Deterministic replay machine for the runs of a counter machine.

    ``labels`` maps each transition of ``source`` to its single-character
    label. A transcript word is the labels of a run in reverse order, the
    mark ``$``, then the input the run reads.
    """

    machine: PushdownCounterMachine
    source: CounterMachine
    labels: dict

    @property
    def transitions(self):
        return {label: t for t, label in self.labels.items()}

    def word(self, path, w):
        return "".join(self.labels[t] for t in reversed(path)) + TRANSCRIPT_MARK + w


def _label(m, labels):
    if labels is None:
        pool = [c for c in _LABEL_POOL if c not in m.alphabet]
        if len(pool) < len(m.transitions):
            raise ValueError(f"not enough labels for {len(m.transitions)} transitions")
        labels = dict(zip(m.transitions, pool))
    values = list(labels.values())
    if len(set(values)) != len(values) or set(labels) != set(m.transitions):
        raise ValueError("transition labels must be one distinct label per transition")
    clash = sorted(set(values) & (set(m.alphabet) | {TRANSCRIPT_MARK, END}))
    if clash:
        raise ValueError(f"labels {clash} clash with input symbols or markers")
    return dict(labels)


def transcript_dpcm(m, labels=None):
    """DPCM accepting ``t_n ... t_1 $ w`` when ``m`` accepts ``w`` via ``t_1 ... t_n``.

    The labels are pushed, then popped one per simulated transition while
    ``w`` is read, so the replay is deterministic whatever ``m`` is.
    """
    if m.pushdown:
        raise TypeError("transcript_dpcm needs a machine without a stack")
    labels = _label(m, labels)
    stack_symbols = sorted(labels.values())
    tops = ["Z"] + stack_symbols
    taken = set(m.states)
    push = "push"
    while push in taken:
        push += "'"
    done = "done"
    while done in taken | {push}:
        done += "'"
    k = m.counters
    zero = (0,) * k
    rows = []
    for label in stack_symbols:
        rows += [(push, label, None, push, RIGHT, zero, top, f"push:{label}") for top in tops]
    rows += [(push, TRANSCRIPT_MARK, None, m.initial, RIGHT, zero, top, "noop") for top in tops]
    for t, label in labels.items():
        rows.append((t.source, t.symbol, t.status, t.target, t.move, t.delta, label, "pop"))
    for q in m.finals:
        rows.append((q, END, None, done, STAY, zero, "Z", "noop"))
    replay = _machine(
        set(m.alphabet) | set(stack_symbols) | {TRANSCRIPT_MARK},
        push,
        {done},
        rows,
        counters=k,
        reversal_bound=m.reversal_bound,
        stack_alphabet=set(stack_symbols),
        bottom="Z",
    )
    logger.info(f"Transcript machine for {m}: {replay}")
    return Transcript(replay, m, labels)


def replay_transcript(transcript, word):
    """Whether the labels before ``$`` spell an accepting run of the source on the rest"""
    if TRANSCRIPT_MARK not in word:
        return False
    head, w = word.split(TRANSCRIPT_MARK, 1)
    by_label = transcript.transitions
    if any(c not in by_label for c in head):
        return False
    m = transcript.source
    state, cursor = m.initial, 0
    counters = [0] * m.counters
    trend = [0] * m.counters
    reversals = [0] * m.counters
    for label in reversed(head):
        t = by_label[label]
        symbol = w[cursor] if cursor < len(w) else END
        status = tuple(1 if c else 0 for c in counters)
        if (t.source, t.symbol, t.status) != (state, symbol, status):
            return False
        for i, d in enumerate(t.delta):
            if d and trend[i] and trend[i] != d:
                reversals[i] += 1
            if d:
                trend[i] = d
            counters[i] += d
        if any(r > m.reversal_bound for r in reversals):
            return False
        state = t.target
        cursor += t.move == RIGHT
    return cursor == len(w) and state in m.finals


def _words(alphabet, max_len):
    for n in range(max_len + 1):
        for letters in itertools.product(sorted(alphabet), repeat=n):
            yield "".join(letters)


def _is_anbncn(x):
    n = len(x) // 3
    return x == "a" * n + "b" * n + "c" * n


def _suff11_oracle(word):
    m = re.fullmatch(r"([def])\[([abc]*)\]", word)
    if not m:
        return False
    inside = {
        "d": _pattern(r"(a*)(b*)c*", (1, 2)),
        "e": _pattern(r"a*(b*)(c*)", (1, 2)),
        "f": _pattern(r"a*b*c*"),
    }
    return not inside[m[1]](m[2])


def _pattern(regex, *groups):
    """Predicate: ``regex`` matches and the named group lengths are all equal"""
    compiled = re.compile(regex)

    def accepts(word):
        m = compiled.fullmatch(word)
        if not m:
            return False
        for tie in groups:
            if len({len(m[g]) for g in tie}) != 1:
                return False
        return True

    return accepts


def _distinct_oracle(word):
    m = re.fullmatch(r"([ab]+)#([ab]+)", word)
    return bool(m) and m[1] != m[2]


def _palindrome_oracle(word):
    m = re.fullmatch(r"([ab]+)#([ab]+)", word)
    return bool(m) and m[2] == m[1][::-1] and m[1].count("a") > m[1].count("b")


def _dpda1_oracle(word):
    m = re.fullmatch(r"(d+)(c+)(b+)(a+)#(a+)(b+)(c+)(d+)", word)
    return bool(m) and all(len(m[i]) == len(m[9 - i]) for i in range(1, 5))


@dataclass(frozen=True)
class GalleryEntry:
    """A named machine (or family of machines) with its reference language.

    ``oracle`` decides membership for the primary machine, the one named by
    ``primary`` when the builder returns a family.
    ``expected_size`` and ``expected_first`` pin the bounded language
    independently of the oracle: how many words of length at most
    ``max_len`` it holds and which comes first in canonical order.
    """

    name: str
    builder: object
    doc: str
    oracle: object
    max_len: int = 8
    primary: str = None
    flavor: str = ""
    kwargs: dict = field(default_factory=dict)
    expected_size: int = None
    expected_first: str = None

    def build(self):
        return self.builder(**self.kwargs)

    def machine(self, built=None):
        built = built if built is not None else self.build()
        return built[self.primary] if self.primary else built


CATALOG = {
    e.name: e
    for e in [
        GalleryEntry("anbn", anbn, "{a^n b^n | n >= 1}", _pattern(r"(a+)(b+)", (1, 2)),
                     flavor="DCM(1,1)", expected_size=4, expected_first="ab"),
        GalleryEntry("anb2n", anb2n, "{a^n b^2n | n >= 1}",
                     lambda w: _pattern(r"(a+)(b+)")(w) and 2 * w.count("a") == w.count("b"),
                     flavor="DCM(1,1)", expected_size=2, expected_first="abb"),
        GalleryEntry("hash_dollar", hash_dollar, "{#a^n b^n} union {$a^n b^2n}, n > 0",
                     lambda w: (w[:1] == "#" and _pattern(r"(a+)(b+)", (1, 2))(w[1:]))
                     or (w[:1] == "$" and _pattern(r"(a+)(b+)")(w[1:])
                         and 2 * w.count("a") == w.count("b")),
                     flavor="DCM(1,1)", expected_size=5, expected_first="#ab"),
        GalleryEntry("anbncn", anbncn, "{a^n b^n c^n | n >= 0}", _is_anbncn, max_len=9,
                     flavor="DCM(2,1)", expected_size=4, expected_first=""),
        GalleryEntry("abab_3rev", abab_3rev, "{a^n b^n a^m b^m | n, m >= 1}",
                     _pattern(r"(a+)(b+)(a+)(b+)", (1, 2), (3, 4)), flavor="DCM(1,3)",
                     expected_size=6, expected_first="abab"),
        GalleryEntry("distinct_k", distinct_k, "{x1 # x2 | x1 != x2 in {a,b}+}",
                     _distinct_oracle, max_len=5, flavor="NCM(1,1)",
                     expected_size=62, expected_first="a#b"),
        GalleryEntry("anbn_or_anb2n", anbn_or_anb2n, "{a^n b^n} union {a^n b^2n}, n >= 1",
                     lambda w: _pattern(r"(a+)(b+)")(w)
                     and w.count("b") in (w.count("a"), 2 * w.count("a")),
                     flavor="NCM(1,1)", expected_size=6, expected_first="ab"),
        GalleryEntry("marked_palindrome_count", marked_palindrome_count,
                     "{x # x^R | x in {a,b}+, |x|_a > |x|_b}", _palindrome_oracle,
                     max_len=7, flavor="DPCM(2,1)", expected_size=6, expected_first="a#a"),
        GalleryEntry("suff11_family", suff11_family,
                     "L = {a^n b^n c^n} and L' = d[~L1] + e[~L2] + f[~L3]",
                     _suff11_oracle, max_len=6, primary="L'", flavor="DCM(1,1)",
                     expected_size=88, expected_first="d[a]"),
        GalleryEntry("dpda1_quotient_pair", dpda1_quotient_pair,
                     "L1 = {d^l c^k b^j a^i # a^i b^j c^k d^l}, L2 = {a^i b^j c^i d^j}",
                     _dpda1_oracle, max_len=11, primary="L1", flavor="DPDA(1) + DCM(2,1)",
                     expected_size=5, expected_first="dcba#abcd"),
    ]
}


def build_named(name):
    """Build the machine or machine family registered as ``name``"""
    if name not in CATALOG:
        raise ValueError(f"unknown gallery entry {name!r}, expected one of {sorted(CATALOG)}")
    return CATALOG[name].build()


def digest(words):
    """sha256 of the accepted words in canonical order"""
    text = "\n".join(sorted(words, key=canonical))
    return hashlib.sha256(text.encode()).hexdigest()


def fingerprint(name):
    """Digest of the bounded language of the entry's primary machine"""
    entry = CATALOG[name]
    m = entry.machine()
    return digest(enumerate_language(m, entry.max_len).require_exact())


def oracle_fingerprint(name):
    """Digest of the entry's reference predicate over the same box"""
    entry = CATALOG[name]
    m = entry.machine()
    return digest(w for w in _words(m.alphabet, entry.max_len) if entry.oracle(w))


def _marked_box(alphabet):
    """DFA for ``[ x ]`` with ``x`` over {a,b,c}"""
    edges = [("s", OPEN, "in"), ("in", CLOSE, "out")]
    edges += [("in", z, "in") for z in "abc"]
    return FiniteAutomaton(alphabet, {"s", "in", "out"}, "s", {"out"}, edges, True)


def _demo_suff11(max_len=10):
    lp = suff11_family()["L'"]
    union = dcm11_suffix_infix(lp, "suffix")
    found = union.language(max_len, within=_marked_box(lp.alphabet))
    expected = {
        OPEN + x + CLOSE for x in _words("abc", max_len - 2) if not _is_anbncn(x)
    }
    return {
        "name": "suff11",
        "holds": found == expected,
        "max_len": max_len,
        "words": len(found),
        "missing": sorted(expected - found, key=canonical)[:10],
        "unexpected": sorted(found - expected, key=canonical)[:10],
        "components": len(union.components),
        "counters": union.counters,
        "source": str(lp),
    }


def _demo_dpda1(max_len=12):
    pair = dpda1_quotient_pair()
    l1, l2 = pair["L1"], pair["L2"]
    quotient = set()
    holds = True
    for i, j, k, l in itertools.product(range(1, max_len), repeat=4):
        if i + j + k + l + 1 > max_len:
            continue
        word = "d" * l + "c" * k + "b" * j + "a" * i + "#" + "a" * i + "b" * j + "c" * k + "d" * l
        holds &= run_word(l1, word).accepted
        # a suffix in L2 has no marker, so every cut lies after it
        for cut in range(word.index("#") + 1, min(len(word), max_len) + 1):
            if run_word(l2, word[cut:]).accepted:
                quotient.add(word[:cut])
    marked = {x[:-1] for x in quotient if x.endswith("#")}
    reversed_l2 = {
        w[::-1] for w in enumerate_language(l2, max_len - 1).require_exact()
    }
    return {
        "name": "dpda1_quotient",
        "holds": bool(holds) and marked == reversed_l2,
        "max_len": max_len,
        "quotient": sorted(quotient, key=canonical),
        "marker_terminated": sorted(marked, key=canonical),
        "reversed_l2": sorted(reversed_l2, key=canonical),
    }


def _demo_dpcm_suffix(max_len=5):
    m = anbn_or_anb2n()
    transcript = transcript_dpcm(m)
    accepted, replayed, corrupted = 0, 0, 0
    holds = True
    for w in _words(m.alphabet, max_len):
        result = run_word(m, w)
        if not result.accepted:
            continue
        accepted += 1
        word = transcript.word(result.path, w)
        holds &= run_word(transcript.machine, word).accepted
        holds &= replay_transcript(transcript, word)
        replayed += 1
        head = word[: word.index(TRANSCRIPT_MARK)]
        if head[::-1] != head:
            swapped = head[::-1] + word[len(head):]
            corrupted += 1
            holds &= not run_word(transcript.machine, swapped).accepted
    return {
        "name": "dpcm_suffix",
        "holds": bool(holds),
        "max_len": max_len,
        "accepted": accepted,
        "replayed": replayed,
        "corrupted_rejected": corrupted,
        "source": str(m),
        "transcript": str(transcript.machine),
    }


DEMOS = {
    "suff11": _demo_suff11,
    "dpda1_quotient": _demo_dpda1,
    "dpcm_suffix": _demo_dpcm_suffix,
}


def demo_nonclosure(name, max_len=None):
    """Run a bounded demonstration and return its report as plain data"""
    if name not in DEMOS:
        raise ValueError(f"unknown demo {name!r}, expected one of {sorted(DEMOS)}")
    report = DEMOS[name]() if max_len is None else DEMOS[name](max_len)
    logger.info(f"Demo {name}: holds={report['holds']}")
    return report
