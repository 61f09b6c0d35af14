import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lieorbits import expr as ex
from lieorbits.brackets import permutation_sum_field
from lieorbits.fields import (BUILTINS, ConfigError, build_bracket_family, builtin, load_family,
                              parse_config, parse_word)


def a(t):
    return 1 + t ** 3 * math.sin(1 / t)


def test_heisenberg_builtin():
    H = builtin("heisenberg")
    assert (H.n, H.m) == (3, 2)
    fam = build_bracket_family(H)
    np.testing.assert_allclose(fam.value(fam.index((1, 2)), (0.3, -0.2, 0.1)), [0, 0, 1])


def test_example5_builtin():
    fam = build_bracket_family(builtin("example5"))
    p = (0.4, -0.3, 0.5)
    np.testing.assert_allclose(fam.value(0, p), [a(0.5), 0, 0])
    np.testing.assert_allclose(fam.value(1, p), [0, 0.4 * a(0.5), 0])
    np.testing.assert_allclose(fam.value(2, p), [0, 0, 0.5])
    np.testing.assert_allclose(fam.value(fam.index((1, 2)), p), [0, a(0.5) ** 2, 0], rtol=1e-14)


def test_example5_a_at_zero_is_one():
    fam = build_bracket_family(builtin("example5"))
    np.testing.assert_array_equal(fam.value(0, (0, 0, 0.0)), [1, 0, 0])


def test_single_constant_field():
    H = parse_config("dim = 2\nfield = 1, 0\n")
    assert H.m == 1
    assert all(ex._is_const(g, 0) for row in H.grads[0] for g in row)


def test_bracket_count_and_order():
    fam = build_bracket_family(builtin("example5"))
    m, s = 3, 2
    assert fam.q == sum(m ** k for k in range(1, s + 1))
    assert fam.words[:3] == ((1,), (2,), (3,))
    assert fam.words[3:6] == ((1, 1), (1, 2), (1, 3))
    assert list(fam.lengths) == sorted(fam.lengths)


def test_length_one_entries_are_verbatim():
    H = builtin("example5")
    fam = build_bracket_family(H)
    assert fam.coeffs[:3] == H.coeffs


@pytest.mark.parametrize("name", sorted(BUILTINS))
def test_repeated_letter_words_are_zero(name):
    fam = build_bracket_family(builtin(name))
    for j in range(1, fam.m + 1):
        k = fam.index((j, j))
        assert fam.zero_flags[k]


def test_antisymmetry():
    fam = build_bracket_family(builtin("example5"))
    for p in [(0.2, 0.3, 0.4), (-1.0, 0.5, -0.8)]:
        for i in range(1, 4):
            for j in range(1, 4):
                np.testing.assert_allclose(fam.value(fam.index((i, j)), p),
                                           -fam.value(fam.index((j, i)), p), atol=1e-14)


def test_config_errors_carry_line_numbers():
    with pytest.raises(ConfigError) as info:
        parse_config("dim = 2\nfield = 1, x3\n")
    assert info.value.line == 2
    with pytest.raises(ConfigError) as info:
        parse_config("dim = 2\nfield = 1\n")
    assert info.value.line == 2
    with pytest.raises(ConfigError):
        parse_config("field = 1, 0\n")
    with pytest.raises(ConfigError) as info:
        parse_config("dim = 1\nbox = 1:0\nfield = 1\n")
    assert info.value.line == 2
    with pytest.raises(ConfigError):
        parse_config("dim = 1\nbogus = 3\n")


def test_comments_and_definitions():
    H = parse_config("""
        # a family with a helper
        dim = 2
        def b = x1^2  # square
        field = b, 1
    """)
    assert ex.evaluate(H.coeffs[0][0], (3.0, 0.0)) == 9.0


def test_load_family_from_file(tmp_path):
    path = tmp_path / "grush.cfg"
    path.write_text(BUILTINS["grushin"])
    H = load_family(str(path))
    assert H.name == "grush" and H.m == 2
    with pytest.raises(ConfigError):
        load_family(str(tmp_path / "missing.cfg"))


def test_parse_word():
    assert parse_word("1,2", 3) == (1, 2)
    assert parse_word("12", 3) == (1, 2)
    with pytest.raises(ConfigError):
        parse_word("1,7", 3)
    with pytest.raises(ConfigError):
        parse_word("a", 3)


def test_index_of_missing_word():
    fam = build_bracket_family(builtin("heisenberg"))
    with pytest.raises(KeyError):
        fam.index((1, 2, 1))


def test_matrix_layout():
    fam = build_bracket_family(builtin("heisenberg"))
    p = (0.1, 0.2, 0.3)
    G = fam.matrix(p)
    assert G.shape == (3, fam.q)
    for j in range(fam.q):
        np.testing.assert_array_equal(G[:, j], fam.value(j, p))


# the nested recursion and the signed permutation sum are independent constructions

STEP3 = build_bracket_family(parse_config("""
    dim = 3
    s = 3
    field = 1, 0, -x2/2 + sin(x3)
    field = x3, 1, x1*x1/2
    field = 0, exp(x1), x2
"""))


@settings(max_examples=25, deadline=None)
@given(st.tuples(*[st.floats(-1, 1)] * 3))
def test_recursion_matches_permutation_sum(x):
    for j, w in enumerate(STEP3.words):
        perm = ex.compile_vector(permutation_sum_field(STEP3, w))(x)
        np.testing.assert_allclose(STEP3.value(j, x), perm, atol=1e-10)


@settings(max_examples=25, deadline=None)
@given(st.tuples(*[st.floats(-1, 1)] * 3))
def test_jacobi_identity(x):
    f = STEP3
    total = sum(f.value(f.index(w), x) for w in [(1, 2, 3), (2, 3, 1), (3, 1, 2)])
    np.testing.assert_allclose(total, 0, atol=1e-10)
