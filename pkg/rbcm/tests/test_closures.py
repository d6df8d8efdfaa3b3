"""Test the closure constructions against brute-force quotients
"""

import itertools

from hypothesis import given, settings, strategies as st
import pytest

from rbcm.analysis import ncm_membership_exact, ncm_unary_extract
from rbcm.closures import (
    _boundary_states,
    _fresh_letters,
    _front,
    _right_checker,
    ComponentUnion,
    HybridDecider,
    NCMFamily,
    PredicateFamily,
    RegularFamily,
    as_family,
    audit_normal_form,
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
    finite,
    ncm_quotient,
    ncm_word_ops,
    regular_quotient_by_family,
    sigma_star,
)
from rbcm.gallery import (
    abab_3rev,
    anb2n,
    anbn,
    anbn_or_anb2n,
    anbncn,
    hash_dollar,
    marked_palindrome_count,
    suff11_family,
)
from rbcm.machines import (
    CounterMachine,
    FiniteAutomaton,
    automaton_words,
    enumerate_language,
    initial_configuration,
    run_word,
    to_machine,
    validate,
    words_automaton,
)


def _words(alphabet, max_len):
    return {
        "".join(letters)
        for n in range(max_len + 1)
        for letters in itertools.product(sorted(alphabet), repeat=n)
    }


class _AllWords:
    """Every word; stands for Sigma* in the brute-force quotients"""

    def __contains__(self, word):
        return True


def _language(m, max_len):
    """Bounded language; words a cap left open are settled by exact membership"""
    out = enumerate_language(m, max_len)
    return set(out.accepted) | {w for w in out.unknown if ncm_membership_exact(m, w)}


def _right_quotient(words, family_words, max_len):
    return {
        w[:i]
        for w in words
        for i in range(min(len(w), max_len) + 1)
        if w[i:] in family_words
    }


def _left_quotient(words, family_words, max_len):
    return {
        w[i:]
        for w in words
        for i in range(len(w) + 1)
        if len(w) - i <= max_len and w[:i] in family_words
    }


def _infixes(words, max_len):
    return {
        w[i:j]
        for w in words
        for i in range(len(w) + 1)
        for j in range(i, min(len(w), i + max_len) + 1)
    }


def _embeddings(word, gaps):
    """Words left after deleting ``gaps`` segments of ``word``"""
    if gaps == 0:
        yield word
        return
    for i in range(len(word) + 1):
        for j in range(i, len(word) + 1):
            for rest in _embeddings(word[j:], gaps - 1):
                yield word[:i] + rest


@pytest.mark.parametrize(
    "m, family, short, long",
    [
        pytest.param(anbn(), None, 8, 16, id="anbn prefixes"),
        pytest.param(anbn(), anbn(), 8, 16, id="anbn by anbn"),
        pytest.param(anb2n(), ["b", "bb"], 8, 16, id="anb2n by b or bb"),
        pytest.param(abab_3rev(), anbn(), 8, 16, id="three reversals by anbn"),
        pytest.param(hash_dollar(), None, 8, 22, id="hash dollar prefixes"),
        pytest.param(anbn(), [""], 8, 8, id="anbn by empty word"),
    ],
)
def test_dcm1_right_quotient(m, family, short, long):
    """Test one-counter right quotients against brute force"""
    if family is None:
        family_words = _AllWords()
        operand = sigma_star(m.alphabet)
    elif isinstance(family, CounterMachine):
        family_words = enumerate_language(family, long).require_exact()
        operand = family
    else:
        family_words = set(family)
        operand = finite(family, m.alphabet)
    quotient = dcm1_right_quotient(m, operand)
    assert isinstance(quotient, CounterMachine)
    assert quotient.deterministic
    assert quotient.counters == 1
    assert validate(quotient) == []
    words = enumerate_language(m, long).require_exact()
    expected = _right_quotient(words, family_words, short)
    assert enumerate_language(quotient, short).require_exact() == expected


def test_dcm1_right_quotient_needs_one_counter():
    with pytest.raises(ValueError, match="one counter"):
        dcm1_right_quotient(anbncn(), sigma_star("abc"))


def test_right_quotient_two_counters():
    """Test prefixes of a two-counter language through the hybrid decider"""
    m = anbncn()
    decider = dcm_right_quotient_general(m, sigma_star(m.alphabet))
    assert isinstance(decider, HybridDecider)
    assert decider.machine is None
    assert decider.note
    words = enumerate_language(m, 15).require_exact()
    expected = _right_quotient(words, _AllWords(), 5)
    assert decider.language(5) == expected
    acceptor = decider.acceptor()
    assert validate(acceptor) == []
    assert enumerate_language(acceptor, 5).require_exact() == expected
    assert decider.accepts("aab")
    assert decider.accepts("aabbc")
    assert not decider.accepts("abb")
    assert not decider.accepts("ac")


def test_right_quotient_counter_loads():
    """Test the per-state counter-load machines of anbn by b+ against simulation.

    Load ``n`` belongs to state ``q`` iff some ``b^m``, ``m >= 1``, is accepted
    from configuration ``(q, n)``. Accepted suffixes from there are no longer
    than ``n + 1``.
    """
    m = anbn()
    b_plus = _dfa([("p", "b", "q"), ("q", "b", "q")], {"q"})
    family = RegularFamily(b_plus)
    annotation, front = _front(m)
    letters = _fresh_letters(m.alphabet, 1)
    letter = letters[0]
    loads = set()
    for q in [q for q in _boundary_states(front) if q in annotation.origin]:
        loader = _right_checker(annotation, q, letters, family)
        upset, dfa = ncm_unary_extract(loader)
        (_, trend), = annotation.origin[q][1]
        for n in range(25):
            start = initial_configuration(annotation.machine, q, (n,))
            # a counter that never moved holds zero
            reachable = (n == 0 or trend != 0) and any(
                run_word(annotation.machine, "b" * k, start=start).accepted
                for k in range(1, n + 3)
            )
            assert ncm_membership_exact(loader, letter * n) == reachable, f"{q} {n}"
            assert (n in upset) == reachable, f"{q} {n}"
            assert dfa.accepts(letter * n) == reachable, f"{q} {n}"
            if reachable:
                loads.add(n)
    assert loads == set(range(1, 25))


def test_dcm_prefix():
    assert isinstance(dcm_prefix(anbn()), CounterMachine)
    assert isinstance(dcm_prefix(anbncn()), HybridDecider)
    assert enumerate_language(dcm_prefix(anbn()), 3).words() == [
        "", "a", "aa", "ab", "aaa", "aab"
    ]


def test_right_quotient_needs_hooks():
    opaque = PredicateFamily("ab", lambda dfa: True)
    with pytest.raises(ValueError, match="hooks"):
        dcm_right_quotient_general(anbn(), opaque)


@pytest.mark.parametrize(
    "m, message, error",
    [
        pytest.param(anbn_or_anb2n(), "deterministic", ValueError, id="nondeterministic"),
        pytest.param(marked_palindrome_count(), "stack", TypeError, id="stack"),
    ],
)
def test_dcm_constructions_reject(m, message, error):
    with pytest.raises(error, match=message):
        dcm_prefix(m)


def test_dcm_boolean_union():
    """Test that the lockstep union matches the guessing machine"""
    union = dcm_boolean("union", anbn(), anb2n())
    assert union.deterministic
    assert (
        enumerate_language(union, 9).require_exact()
        == enumerate_language(anbn_or_anb2n(), 9).require_exact()
    )


def test_dcm_boolean_complement():
    m = anbn()
    complement = dcm_boolean("complement", m)
    assert complement.deterministic
    inside = enumerate_language(m, 6).require_exact()
    assert enumerate_language(complement, 6).require_exact() == _words("ab", 6) - inside


def test_dcm_boolean_intersect_regular():
    dfa = words_automaton(["ab", "aabb", "ba"], {"a", "b"})
    out = dcm_boolean("intersect_regular", anbn(), dfa=dfa)
    assert enumerate_language(out, 6).words() == ["ab", "aabb"]


@pytest.mark.parametrize(
    "op, machines, error",
    [
        pytest.param("union", [], ValueError, id="no machines"),
        pytest.param("xor", [anbn()], ValueError, id="unknown op"),
        pytest.param("complement", [anbn(), anb2n()], ValueError, id="two to complement"),
        pytest.param("intersect_regular", [anbn()], ValueError, id="missing dfa"),
        pytest.param("complement", [anbn_or_anb2n()], ValueError, id="nondeterministic"),
        pytest.param("union", [marked_palindrome_count()], TypeError, id="stack"),
    ],
)
def test_dcm_boolean_errors(op, machines, error):
    with pytest.raises(error):
        dcm_boolean(op, *machines)


def test_dcm_left_quotient_finite():
    """Test left quotients by a finite set through counter preloading"""
    m = anbn()
    words = ["a", "aa", "b"]
    out = dcm_left_quotient_finite(words, m)
    assert out.deterministic
    expected = _left_quotient(enumerate_language(m, 9).require_exact(), set(words), 7)
    assert enumerate_language(out, 7).require_exact() == expected


def test_dcm_left_quotient_finite_no_survivor():
    out = dcm_left_quotient_finite(["b", "ba"], anbn())
    assert enumerate_language(out, 5).words() == []


@pytest.mark.parametrize(
    "m, max_len",
    [
        pytest.param(anbn(), 8, id="anbn"),
        pytest.param(anb2n(), 8, id="anb2n"),
        pytest.param(hash_dollar(), 6, id="hash_dollar"),
        pytest.param(suff11_family()["L1"], 6, id="L1"),
        pytest.param(suff11_family()["L2"], 6, id="L2"),
        pytest.param(suff11_family()["L3"], 6, id="L3"),
        pytest.param(suff11_family()["L'"], 5, id="L'"),
    ],
)
def test_dcm11_normalize(m, max_len):
    """Test that the normal form passes every audit and keeps the language"""
    nf = dcm11_normalize(m)
    assert audit_normal_form(nf) == []
    assert nf.machine.deterministic
    assert nf.machine.finals == {nf.accept}
    assert nf.up.isdisjoint(nf.down)
    assert (
        enumerate_language(nf.machine, max_len).require_exact()
        == enumerate_language(m, max_len).require_exact()
    )


@pytest.mark.parametrize(
    "m, error",
    [
        pytest.param(anbncn(), ValueError, id="two counters"),
        pytest.param(abab_3rev(), ValueError, id="three reversals"),
        pytest.param(anbn_or_anb2n(), ValueError, id="nondeterministic"),
    ],
)
def test_dcm11_normalize_rejects(m, error):
    with pytest.raises(error):
        dcm11_normalize(m)


def _family_cases():
    L1 = suff11_family()["L1"]
    return [
        pytest.param(sigma_star("ab"), None, anbn(), 8, 16, id="suffixes of anbn"),
        pytest.param(anbn(), None, anb2n(), 8, 24, id="anbn into anb2n"),
        pytest.param(
            words_automaton(["a", "aa", "aab"], {"a", "b"}),
            ["a", "aa", "aab"],
            anbn(),
            8,
            12,
            id="finite into anbn",
        ),
        pytest.param(anbn_or_anb2n(), None, anb2n(), 8, 24, id="ncm into anb2n"),
        pytest.param(sigma_star("abc"), None, L1, 8, 16, id="suffixes of L1"),
    ]


def _family_words(f, listed, alphabet, long):
    if listed is not None:
        return set(listed)
    if isinstance(f, CounterMachine):
        return enumerate_language(f, long).require_exact()
    return _AllWords()


@pytest.mark.parametrize("f, listed, m, short, long", _family_cases())
def test_dcm11_left_quotient(f, listed, m, short, long):
    """Test left quotients of DCM(1,1) languages against brute force"""
    union = dcm11_left_quotient(f, m)
    assert isinstance(union, ComponentUnion)
    for (kind, _), c in union.components:
        assert kind in ("zero", "up", "down")
        assert c.deterministic
        assert c.counters <= 1
        assert validate(c) == []
    words = enumerate_language(m, long).require_exact()
    family_words = _family_words(f, listed, m.alphabet, long)
    expected = _left_quotient(words, family_words, short)
    assert union.language(short) == expected
    for w in sorted(expected)[:5]:
        assert union.accepts(w)


def test_dcm11_left_quotient_closed_forms():
    union = dcm11_left_quotient(anbn(), anb2n())
    assert union.language(6) == {"b" * k for k in range(1, 7)}
    union = dcm11_left_quotient(anbn_or_anb2n(), anb2n())
    assert union.language(5) == {"b" * k for k in range(6)}


def _accepted_from(n, configurations, max_len):
    """Words the machine accepts from any of the ``(state, counter)`` pairs"""
    candidates = sorted(_words(n.alphabet, max_len))
    words = set()
    for q, i in configurations:
        start = initial_configuration(n, state=q, counters=(i,))
        words |= {y for y in candidates if run_word(n, y, start=start).accepted}
    return words


@pytest.mark.parametrize("f, listed, m, short, long", _family_cases())
def test_dcm11_left_quotient_configurations(f, listed, m, short, long):
    """Test each component against the configurations it stands for.

    Counter values up to 6 are listed; every accepted word from a larger
    value is longer than the words compared.
    """
    union = dcm11_left_quotient(f, m)
    nf = union.normal_form
    n = nf.machine
    reached = {q: [i for i in range(7) if i in upset] for q, upset in union.slices.items()}
    for q, values in reached.items():
        for i in range(7):
            assert union.configurations.accepts([q] + [union.letter] * i) == (i in values)

    expected = {("zero", q): [(q, 0)] for q, values in reached.items() if 0 in values}
    for q, values in reached.items():
        if q in nf.up and any(values):
            expected[("up", q)] = [(q, i) for i in values if i > 0]
    down = [(q, i) for q, values in reached.items() if q in nf.down for i in values if i > 0]
    if down:
        expected[("down", "*")] = down

    built = dict(union.components)
    length = 5
    for label in set(expected) | set(built):
        want = _accepted_from(n, expected.get(label, ()), length)
        got = set()
        if label in built:
            got = enumerate_language(built[label], length).require_exact()
        assert got == want, label


def test_component_union_combined():
    """Test the single-machine form of a component union"""
    union = dcm11_suffix_infix(anbn(), "suffix")
    combined = union.combined
    assert combined.deterministic
    assert combined.counters == union.counters
    assert union.counters <= len(union.components)
    assert enumerate_language(combined, 6).require_exact() == union.language(6)


@pytest.mark.parametrize(
    "m, which, short, long",
    [
        pytest.param(anbn(), "suffix", 8, 16, id="anbn suffix"),
        pytest.param(anbn(), "infix", 6, 12, id="anbn infix"),
        pytest.param(anb2n(), "suffix", 8, 15, id="anb2n suffix"),
        pytest.param(anb2n(), "infix", 5, 15, id="anb2n infix"),
        pytest.param(suff11_family()["L2"], "suffix", 6, 12, id="L2 suffix"),
    ],
)
def test_dcm11_suffix_infix(m, which, short, long):
    """Test suffix and infix closures of DCM(1,1) languages"""
    union = dcm11_suffix_infix(m, which)
    words = enumerate_language(m, long).require_exact()
    if which == "suffix":
        expected = _left_quotient(words, _AllWords(), short)
    else:
        expected = _infixes(words, short)
    assert union.language(short) == expected


def test_dcm11_suffix_infix_rejects_unknown():
    with pytest.raises(ValueError):
        dcm11_suffix_infix(anbn(), "outfix")


@pytest.mark.parametrize("order", ["left-first", "right-first"])
def test_dcm11_two_sided_quotient(order):
    """Test that both orders of a two-sided quotient agree with brute force"""
    m = anbn()
    union = dcm11_two_sided_quotient(sigma_star("ab"), m, sigma_star("ab"), order=order)
    expected = _infixes(enumerate_language(m, 12).require_exact(), 6)
    assert union.language(6) == expected
    union = dcm11_two_sided_quotient(finite(["a"], "ab"), m, finite(["b"], "ab"), order=order)
    assert union.language(6) == {"a" * k + "b" * k for k in range(4)}


def test_dcm11_two_sided_quotient_rejects_order():
    with pytest.raises(ValueError):
        dcm11_two_sided_quotient(epsilon("ab"), anbn(), epsilon("ab"), order="inside-out")


@pytest.mark.parametrize(
    "op, gaps",
    [
        pytest.param("pref", 1, id="prefixes"),
        pytest.param("suff", 1, id="suffixes"),
        pytest.param("infx", 1, id="infixes"),
        pytest.param("outf", 1, id="outfixes"),
        pytest.param("emb", 2, id="two gaps"),
    ],
)
def test_ncm_word_ops(op, gaps):
    """Test the word operations on {a^n b^n} with capped runs settled exactly"""
    short, long = 4, 8
    m = anbn()
    words = enumerate_language(m, long).require_exact()
    if op == "pref":
        expected = _right_quotient(words, _AllWords(), short)
    elif op == "suff":
        expected = _left_quotient(words, _AllWords(), short)
    elif op == "infx":
        expected = _infixes(words, short)
    else:
        expected = {
            v for w in words for v in _embeddings(w, gaps) if len(v) <= short
        }
    out = ncm_word_ops(op, m, gaps=gaps)
    assert not out.deterministic
    assert _language(out, short) == expected


@pytest.mark.parametrize(
    "op, gaps",
    [pytest.param("reverse", 1, id="unknown op"), pytest.param("emb", -1, id="negative gaps")],
)
def test_ncm_word_ops_errors(op, gaps):
    with pytest.raises(ValueError):
        ncm_word_ops(op, anbn(), gaps=gaps)


def test_ncm_quotient_right():
    """Test the right quotient of NCM languages"""
    m1 = anbn_or_anb2n()
    m2 = to_machine(words_automaton(["b", "bb"], {"a", "b"}))
    expected = _right_quotient(enumerate_language(m1, 12).require_exact(), {"b", "bb"}, 4)
    assert _language(ncm_quotient("right", m1, m2), 4) == expected


def test_ncm_quotient_left():
    """Test the left quotient of NCM languages"""
    out = ncm_quotient("left", anbn_or_anb2n(), anbn())
    assert _language(out, 4) == {"b" * k for k in range(5)}


def test_ncm_quotient_errors():
    with pytest.raises(ValueError):
        ncm_quotient("up", anbn(), anbn())
    with pytest.raises(TypeError):
        ncm_quotient("right", marked_palindrome_count(), anbn())


R_WORDS = ["ab", "aab", "abb", "b"]


@pytest.mark.parametrize(
    "side, family, family_words",
    [
        pytest.param("right", anbn(), {"ab", "aabb"}, id="right by anbn"),
        pytest.param("left", anbn(), {"ab", "aabb"}, id="left by anbn"),
        pytest.param("right", sigma_star("ab"), _words("ab", 3), id="right by sigma star"),
        pytest.param("left", finite(["a"], "ab"), {"a"}, id="left by a"),
        pytest.param(
            "right",
            PredicateFamily("ab", lambda dfa: "b" in automaton_words(dfa, 3)),
            {"b"},
            id="right by opaque b",
        ),
    ],
)
def test_regular_quotient_by_family(side, family, family_words):
    """Test regular quotients by any family with emptiness of intersection"""
    r = words_automaton(R_WORDS, {"a", "b"})
    out = regular_quotient_by_family(side, r, family)
    assert out.deterministic
    if side == "right":
        expected = _right_quotient(set(R_WORDS), family_words, 3)
    else:
        expected = _left_quotient(set(R_WORDS), family_words, 3)
    assert automaton_words(out, 3) == expected


def _dfa(edges, finals):
    return FiniteAutomaton({"a", "b"}, {"p", "q"}, "p", finals, edges, True)


def _regular_cases():
    a_star_b_star = _dfa([("p", "a", "p"), ("p", "b", "q"), ("q", "b", "q")], {"p", "q"})
    ends_in_b = _dfa(
        [("p", "a", "p"), ("p", "b", "q"), ("q", "a", "p"), ("q", "b", "q")], {"q"}
    )
    one_b = _dfa([("p", "a", "p"), ("p", "b", "q"), ("q", "a", "q")], {"q"})
    return [
        pytest.param("right", a_star_b_star, anbn(), id="a*b* by anbn"),
        pytest.param("left", a_star_b_star, anbn(), id="anbn into a*b*"),
        pytest.param("right", ends_in_b, anb2n(), id="ending in b by anb2n"),
        pytest.param("left", a_star_b_star, anbn_or_anb2n(), id="ncm into a*b*"),
        pytest.param("left", one_b, anbn(), id="anbn into a*ba*"),
        pytest.param("right", one_b, anb2n(), id="a*ba* by anb2n"),
    ]


@pytest.mark.parametrize("side, r, f", _regular_cases())
def test_regular_quotient_by_counter_machine(side, r, f):
    """Test quotients of infinite regular languages by counter machine languages"""
    out = regular_quotient_by_family(side, r, f)
    assert out.deterministic
    r_words = automaton_words(r, 16)
    f_words = enumerate_language(f, 8).require_exact()
    oracle = _right_quotient if side == "right" else _left_quotient
    assert automaton_words(out, 8) == oracle(r_words, f_words, 8)


@settings(deadline=None, max_examples=25)
@given(
    st.sets(st.text(alphabet="ab", max_size=3), max_size=5),
    st.sets(st.text(alphabet="ab", max_size=2), max_size=3),
    st.sampled_from(["left", "right"]),
)
def test_regular_quotient_by_finite_sets(words, family_words, side):
    """Test regular quotients by finite sets against brute force"""
    r = words_automaton(words, {"a", "b"})
    out = regular_quotient_by_family(side, r, finite(family_words, "ab"))
    oracle = _right_quotient if side == "right" else _left_quotient
    assert automaton_words(out, 3) == oracle(words, family_words, 3)


def test_regular_quotient_rejects_side():
    with pytest.raises(ValueError):
        regular_quotient_by_family("up", words_automaton(["a"], {"a"}), epsilon("a"))


def test_families():
    """Test wrapping operands into language families"""
    assert isinstance(as_family(anbn()), NCMFamily)
    assert isinstance(as_family(words_automaton(["a"], {"a", "b"})), RegularFamily)
    assert sigma_star("ab").covers("ab")
    assert not sigma_star("a").covers("ab")
    assert not epsilon("ab").covers("ab")
    assert as_family(anbn()).meets(words_automaton(["aabb"], {"a", "b"}))
    assert not as_family(anbn()).meets(words_automaton(["aab"], {"a", "b"}))
    with pytest.raises(TypeError):
        as_family("anbn")
    with pytest.raises(TypeError):
        NCMFamily(marked_palindrome_count())
