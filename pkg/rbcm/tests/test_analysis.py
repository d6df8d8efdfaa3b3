"""Test phase expansion, path images and the exact decision procedures
"""

from dataclasses import replace
import itertools

from hypothesis import given, settings, strategies as st
import pytest

from rbcm.analysis import (
    FlowSystem,
    flow_systems,
    lift_run,
    ncm_emptiness,
    ncm_membership_exact,
    ncm_parikh_bounded,
    ncm_unary_extract,
    ncm_unary_extract_by_final,
    ncm_witness,
    normalize_reversals,
    path_images,
    phase_expand,
)
from rbcm.gallery import (
    CATALOG,
    abab_3rev,
    anb2n,
    anbn,
    anbn_or_anb2n,
    anbncn,
    build_named,
    distinct_k,
    dpda1_quotient_pair,
    hash_dollar,
    marked_palindrome_count,
    random_machine,
    suff11_family,
    unary_machines,
    unary_pattern,
)
from rbcm.machines import (
    END,
    RIGHT,
    STAY,
    Caps,
    CounterMachine,
    ResourceLimitError,
    Transition,
    Verdict,
    canonical,
    enumerate_language,
    restrict,
    run_word,
    words_automaton,
)

BFS_LEN = 6


def _never_drained():
    """Increments on every a but demands a zero counter at the end"""
    return CounterMachine(
        "a",
        {"s", "t", "acc"},
        "s",
        {"acc"},
        [
            Transition("s", "a", (0,), "t", RIGHT, (1,)),
            Transition("t", "a", (1,), "t", RIGHT, (1,)),
            Transition("t", END, (0,), "acc", STAY, (0,)),
        ],
    )


def _corpus():
    """Gallery machines, empty constructions and seeded random machines"""
    out = [
        ("anbn", anbn()),
        ("anb2n", anb2n()),
        ("hash_dollar", hash_dollar()),
        ("anbncn", anbncn()),
        ("abab_3rev", abab_3rev()),
        ("distinct_k", distinct_k()),
        ("anbn_or_anb2n", anbn_or_anb2n()),
        ("dpda1_L2", dpda1_quotient_pair()["L2"]),
        ("never_drained", _never_drained()),
        ("anbn_meets_aab", restrict(anbn(), words_automaton(["aab", "ba"], {"a", "b"}))),
    ]
    out += [(f"suff11_{k}", m) for k, m in suff11_family().items() if k != "L'"]
    out += [(name, m) for name, m, _ in unary_machines()]
    for seed in range(14):
        out.append((f"random_{seed}", random_machine(seed, states=4, transitions=9)))
    for seed in range(14, 18):
        out.append(
            (f"random2_{seed}", random_machine(seed, states=3, counters=2, transitions=7))
        )
    return out


CORPUS = _corpus()


@pytest.mark.parametrize(
    "m", [pytest.param(m, id=name) for name, m in CORPUS]
)
def test_emptiness_agrees_with_bfs(m):
    """Test emptiness against capped search and replay every witness"""
    found = enumerate_language(m, BFS_LEN, Caps(counter=BFS_LEN + 16)).accepted
    empty = ncm_emptiness(m)
    if found:
        assert not empty
    if empty:
        assert ncm_witness(m) is None
    else:
        witness = ncm_witness(m)
        assert witness is not None
        assert run_word(m, witness, Caps(counter=10 ** 4, steps=10 ** 7)).accepted


def test_corpus_size():
    assert len(CORPUS) >= 30


@pytest.mark.parametrize(
    "m, expected",
    [
        pytest.param(anbn(), False, id="anbn"),
        pytest.param(_never_drained(), True, id="never drained"),
        pytest.param(
            restrict(anbn(), words_automaton(["aab", "ba"], {"a", "b"})), True, id="anbn meets aab"
        ),
        pytest.param(anbncn(), False, id="anbncn"),
    ],
)
def test_ncm_emptiness_known(m, expected):
    assert ncm_emptiness(m) is expected


@pytest.mark.parametrize(
    "m, word, expected",
    [
        pytest.param(anbn(), "aabb", True, id="anbn aabb"),
        pytest.param(anbn(), "aab", False, id="anbn aab"),
        pytest.param(anbn(), "abc", False, id="foreign symbol"),
        pytest.param(anbncn(), "", True, id="anbncn empty word"),
        pytest.param(anbncn(), "aabbc", False, id="anbncn short c"),
        pytest.param(distinct_k(), "ab#ba", True, id="distinct"),
        pytest.param(distinct_k(), "ab#ab", False, id="equal blocks"),
        pytest.param(distinct_k(), "a#ab", True, id="different lengths"),
        pytest.param(abab_3rev(), "abaabb", True, id="three reversals"),
        pytest.param(abab_3rev(), "aabbab", True, id="three reversals other"),
        pytest.param(abab_3rev(), "abab" + "b", False, id="extra b"),
        pytest.param(anbn_or_anb2n(), "abb", True, id="double branch"),
        pytest.param(anbn_or_anb2n(), "abbb", False, id="neither branch"),
    ],
)
def test_ncm_membership_exact(m, word, expected):
    """Test exact membership against hand-checked words"""
    assert ncm_membership_exact(m, word) is expected


def test_membership_rejects_stack_machines():
    with pytest.raises(TypeError):
        ncm_membership_exact(marked_palindrome_count(), "a#a")


def _chain(lengths, tail=False):
    """Counter-free unary machine for ``a^n``, ``n`` in ``lengths`` or beyond them with ``tail``"""
    top = max(lengths)
    rows = [Transition(f"H{i}", "a", (0,), f"H{i + 1}", RIGHT, (0,)) for i in range(top)]
    if tail:
        rows.append(Transition(f"H{top}", "a", (0,), f"H{top}", RIGHT, (0,)))
    rows += [Transition(f"H{n}", END, (0,), "acc", STAY, (0,)) for n in sorted(set(lengths))]
    states = {f"H{i}" for i in range(top + 1)} | {"acc"}
    return CounterMachine("a", states, "H0", {"acc"}, rows)


def _guessed(*machines):
    """Union of one-counter unary machines through a guess before the first move"""
    states, rows, finals = {"s"}, [], set()
    for i, m in enumerate(machines):
        p = f"{i}."
        states |= {p + q for q in m.states}
        finals |= {p + q for q in m.finals}
        rows += [replace(t, source=p + t.source, target=p + t.target) for t in m.transitions]
        for z in ("a", END):
            rows.append(Transition("s", z, (0,), p + m.initial, STAY, (0,)))
    return CounterMachine("a", states, "s", finals, rows)


def _unary_corpus():
    out = list(unary_machines())
    for head, up, down in [(0, 2, 3), (4, 1, 1), (2, 3, 1), (5, 2, 2)]:
        period = up + down
        out.append(
            (
                f"unary_{head}_{up}_{down}",
                unary_pattern(head, up, down),
                lambda n, h=head, p=period: n >= h and (n - h) % p == 0,
            )
        )
    out += [
        ("finite_1_4", _chain([1, 4]), lambda n: n in (1, 4)),
        ("from_3", _chain([3], tail=True), lambda n: n >= 3),
        (
            "evens_or_3n_plus_1",
            _guessed(unary_pattern(0, 1, 1), unary_pattern(1, 1, 2)),
            lambda n: n % 2 == 0 or n % 3 == 1,
        ),
        (
            "odd_or_0_2",
            _guessed(unary_pattern(1, 1, 1), _chain([0, 2])),
            lambda n: n % 2 == 1 or n in (0, 2),
        ),
    ]
    return out


def _gallery_machines():
    """Every stack-free gallery machine, family members included"""
    out = []
    for name in sorted(CATALOG):
        built = build_named(name)
        members = built if isinstance(built, dict) else {"": built}
        out += [(f"{name} {k}".strip(), m) for k, m in members.items() if not m.pushdown]
    out += [(name, m) for name, m, _ in _unary_corpus()]
    return out


GALLERY = _gallery_machines()


def _check_against_run(m, word):
    result = run_word(m, word)
    if result.verdict is not Verdict.UNKNOWN:
        assert ncm_membership_exact(m, word) == result.accepted, word


@pytest.mark.parametrize("m", [pytest.param(m, id=name) for name, m in GALLERY])
def test_membership_agrees_with_runs(m):
    """Test exact membership against conclusive simulation on short and accepted words"""
    symbols = sorted(m.alphabet)
    exhaustive = {1: 8, 2: 5, 3: 3}.get(len(symbols), 2)
    for n in range(exhaustive + 1):
        for letters in itertools.product(symbols, repeat=n):
            _check_against_run(m, "".join(letters))
    accepted = sorted(enumerate_language(m, 8).accepted, key=canonical)
    for w in accepted[:: max(1, len(accepted) // 40)]:
        _check_against_run(m, w)


@pytest.mark.parametrize("m", [pytest.param(m, id=name) for name, m in GALLERY])
@settings(deadline=None, max_examples=30)
@given(data=st.data())
def test_membership_agrees_with_runs_on_drawn_words(m, data):
    """Test exact membership against conclusive simulation on words up to length 8"""
    _check_against_run(m, data.draw(st.text(alphabet=sorted(m.alphabet), max_size=8)))


@pytest.mark.parametrize(
    "m, predicate", [pytest.param(m, p, id=name) for name, m, p in _unary_corpus()]
)
def test_ncm_unary_extract(m, predicate):
    """Test the extracted unary DFA against simulation and the closed form"""
    upset, dfa = ncm_unary_extract(m)
    assert dfa.deterministic
    for n in range(41):
        word = "a" * n
        assert (n in upset) == predicate(n), f"{n}"
        assert dfa.accepts(word) == predicate(n), f"{n}"
        assert run_word(m, word).accepted == predicate(n), f"{n}"


def test_ncm_unary_extract_needs_unary():
    with pytest.raises(ValueError, match="unary"):
        ncm_unary_extract(anbn())


def test_ncm_unary_extract_by_final():
    m = unary_pattern(1, 1, 1)
    split = ncm_unary_extract_by_final(m)
    assert set(split) == {"acc"}
    upset, _ = split["acc"]
    assert [n for n in range(8) if n in upset] == [1, 3, 5, 7]


def test_ncm_unary_extract_from_three():
    """Test the normal form of {a^n | n >= 3}: threshold 3 and every residue"""
    upset, dfa = ncm_unary_extract(_chain([3], tail=True))
    assert upset.threshold == 3
    assert upset.period == 1
    assert upset.residues == {0}
    assert upset.explicit == set()
    assert [n for n in range(10) if dfa.accepts("a" * n)] == list(range(3, 10))


def test_ncm_parikh_bounded():
    """Test exponent vectors of a letter-bounded machine"""
    image = ncm_parikh_bounded(anbn(), ("a", "b"))
    assert image.dimension == 2
    for i in range(6):
        for j in range(6):
            assert ((i, j) in image) == (i == j and i >= 1)


def test_ncm_parikh_bounded_doubled():
    image = ncm_parikh_bounded(anb2n(), ("a", "b"))
    for i in range(8):
        for j in range(8):
            assert ((i, j) in image) == (j == 2 * i and i >= 1), f"{i} {j}"


def test_ncm_parikh_bounded_two_counters():
    image = ncm_parikh_bounded(dpda1_quotient_pair()["L2"], ("a", "b", "c", "d"))
    assert (2, 1, 2, 1) in image
    assert (2, 1, 1, 2) not in image
    assert (0, 0, 0, 0) not in image


def test_ncm_parikh_bounded_rejects_unordered():
    with pytest.raises(ValueError, match="after a later letter"):
        ncm_parikh_bounded(abab_3rev(), ("a", "b"))


def test_normalize_reversals():
    """Test that splitting counters keeps the language and removes reversals"""
    m = abab_3rev()
    normalized = normalize_reversals(m)
    assert normalized.reversal_bound == 1
    assert normalized.counters == 2
    assert enumerate_language(normalized, 8).accepted == enumerate_language(m, 8).accepted


def test_phase_expand_needs_one_reversal():
    with pytest.raises(ValueError, match="1-reversal"):
        phase_expand(abab_3rev())


def test_lift_run():
    """Test that an accepting run maps onto a start-to-final phase path"""
    m = anbn()
    graph = phase_expand(m)
    result = run_word(m, "aabb")
    lifted = lift_run(graph, "aabb", result)
    assert lifted is not None
    assert len(lifted) == len(result.path) + 1
    assert lifted[0].source is graph.start
    assert lifted[-1].target in graph.finals
    assert [e.target.phases[0] for e in lifted] == ["Z1", "P+", "P+", "P-", "Z2", "Z2"]


def test_path_images_and_flow_systems():
    """Test that balances cut the path image down to accepted Parikh vectors"""
    m = anbn()
    images = path_images(phase_expand(m), ("a", "b"))
    assert set(images) == {("Z2",)}
    assert all(c.dimension == 4 for c in images[("Z2",)].components)
    systems = flow_systems(m, ("a", "b"))
    assert systems
    assert all(isinstance(fs, FlowSystem) for fs in systems)
    for fs in systems:
        for comp in fs.solutions().components:
            inc, dec = comp.constant[:2]
            assert inc == dec


def test_max_supports(monkeypatch):
    """Test that the support bound is read at call time and enforced"""
    monkeypatch.setenv("RBCM_MAX_SUPPORTS", "0")
    with pytest.raises(ResourceLimitError, match="RBCM_MAX_SUPPORTS"):
        ncm_emptiness(anbn())


def test_analysis_rejects_stack_machines():
    with pytest.raises(TypeError):
        ncm_emptiness(marked_palindrome_count())
