import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cavityqpc.quantum_core import (
    AtomLabel,
    Basis,
    ProductLabel,
    SingleAtomState,
    TwoAtomState,
    atom_branches,
    cavity_unitary,
    equal_up_to_phase,
    evolve_cavity,
    make_rng,
    measure_atom,
    measure_single,
    prepare_decoy,
    prepare_product,
    uniform_ints,
    z_parity,
)

# (sqrt(2)/2) * exp(-i pi/4) evaluated by hand
C = 0.5 - 0.5j


def sigma3(p, n):
    return 3 * math.sqrt(p * (1 - p) / n)


def random_state(rng, dim=4):
    v = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    return v / np.linalg.norm(v)


finite = st.floats(-1, 1, allow_nan=False, allow_infinity=False)


@st.composite
def two_atom_states(draw):
    parts = [complex(draw(finite), draw(finite)) for _ in range(4)]
    v = np.array(parts)
    n = np.linalg.norm(v)
    if n < 1e-3:
        v = np.array([1, 0, 0, 0], dtype=complex)
        n = 1.0
    return TwoAtomState(v / n)


class TestPreparation:
    @pytest.mark.parametrize(
        "label, expected",
        [
            (ProductLabel.GG, [1, 0, 0, 0]),
            (ProductLabel.GE, [0, 1, 0, 0]),
            (ProductLabel.EG, [0, 0, 1, 0]),
            (ProductLabel.EE, [0, 0, 0, 1]),
        ],
    )
    def test_product_states_are_basis_vectors(self, label, expected):
        s = prepare_product(label)
        assert np.array_equal(s.amps, np.array(expected, dtype=complex))
        assert s.norm() == 1.0

    def test_decoy_amplitudes(self):
        r = 1 / math.sqrt(2)
        assert prepare_decoy(AtomLabel.G) == SingleAtomState(1, 0)
        assert prepare_decoy(AtomLabel.E) == SingleAtomState(0, 1)
        plus, minus = prepare_decoy(AtomLabel.PLUS), prepare_decoy(AtomLabel.MINUS)
        assert (plus.amp_g, plus.amp_e) == pytest.approx((r, r), abs=1e-15)
        assert (minus.amp_g, minus.amp_e) == pytest.approx((r, -r), abs=1e-15)
        for lab in AtomLabel:
            assert abs(prepare_decoy(lab).norm() - 1) <= 1e-12

    def test_non_finite_rejected(self):
        with pytest.raises(ValueError):
            TwoAtomState([np.nan, 0, 0, 0])
        with pytest.raises(ValueError):
            SingleAtomState(complex("inf"), 0)
        with pytest.raises(ValueError):
            TwoAtomState([1, 0, 0])

    def test_parity_of_labels(self):
        assert [lab.parity for lab in ProductLabel] == [0, 1, 1, 0]


class TestCavityUnitary:
    def test_columns_match_evolution_law(self):
        u = cavity_unitary()
        # |gg> -> c(|gg> - i|ee>) etc., written out component by component
        expected = {
            0: [C, 0, 0, -1j * C],
            1: [0, C, -1j * C, 0],
            2: [0, -1j * C, C, 0],
            3: [-1j * C, 0, 0, C],
        }
        for col, vec in expected.items():
            assert np.allclose(u[:, col], vec, atol=1e-15, rtol=0)

    def test_gg_column_numeric(self):
        assert np.allclose(cavity_unitary()[:, 0], [0.5 - 0.5j, 0, 0, -0.5 - 0.5j], atol=1e-15)

    def test_unitary(self):
        u = cavity_unitary()
        assert np.max(np.abs(u.conj().T @ u - np.eye(4))) <= 1e-12

    def test_parity_preserved(self):
        u = cavity_unitary()
        for label in ProductLabel:
            col = u @ prepare_product(label).amps
            for k in range(4):
                if abs(col[k]) > 1e-12:
                    assert z_parity(k) == label.parity

    def test_returned_matrix_is_a_copy(self):
        u = cavity_unitary()
        u[0, 0] = 99
        assert cavity_unitary()[0, 0] == pytest.approx(C, abs=1e-15)

    def test_evolve_examples(self):
        out = evolve_cavity(prepare_product(ProductLabel.GG))
        assert np.allclose(out.amps, [0.5 - 0.5j, 0, 0, -0.5 - 0.5j], atol=1e-15)
        out = evolve_cavity(prepare_product(ProductLabel.EG))
        assert np.allclose(out.amps, [0, -0.5 - 0.5j, 0.5 - 0.5j, 0], atol=1e-15)

    def test_norm_conserved_over_random_states(self):
        rng = np.random.default_rng(7)
        worst = 0.0
        for _ in range(1000):
            s = TwoAtomState(random_state(rng))
            worst = max(worst, abs(evolve_cavity(s).norm() - 1))
        assert worst <= 1e-12

    def test_rejects_unnormalized(self):
        with pytest.raises(ValueError, match="normalized"):
            evolve_cavity(TwoAtomState([1, 1, 0, 0]))
        # deviation below the 1e-9 input threshold is accepted
        evolve_cavity(TwoAtomState([1 + 1e-11, 0, 0, 0]))


class TestMeasureAtom:
    def test_evolved_gg_branches(self):
        s = evolve_cavity(prepare_product(ProductLabel.GG))
        # Born oracle: |amp|^2 summed over atom A = g / e
        p_g = abs(s.amps[0]) ** 2 + abs(s.amps[1]) ** 2
        assert p_g == pytest.approx(0.5, abs=1e-15)
        branches = {o: (p, post) for o, p, post in atom_branches(s, "A", Basis.Z)}
        assert branches[AtomLabel.G][0] == pytest.approx(p_g, abs=1e-15)
        assert equal_up_to_phase(branches[AtomLabel.G][1], prepare_product(ProductLabel.GG))
        assert equal_up_to_phase(branches[AtomLabel.E][1], prepare_product(ProductLabel.EE))

        rng = make_rng(3)
        for _ in range(50):
            outcome, post = measure_atom(s, "A", Basis.Z, rng)
            target = ProductLabel.GG if outcome is AtomLabel.G else ProductLabel.EE
            assert equal_up_to_phase(post, prepare_product(target), tol=1e-12)

    def test_eigenstate_is_deterministic(self):
        s = prepare_product(ProductLabel.GE)
        rng = make_rng(0)
        for _ in range(20):
            outcome, post = measure_atom(s, "B", Basis.Z, rng)
            assert outcome is AtomLabel.E
            assert np.allclose(post.amps, [0, 1, 0, 0])

    def test_evolved_ge_has_odd_joint_parity(self):
        # oracle: enumerate every (A, B) branch with nonzero weight
        s = evolve_cavity(prepare_product(ProductLabel.GE))
        seen = set()
        for oa, pa, post in atom_branches(s, "A", Basis.Z):
            for ob, pb, _ in atom_branches(post, "B", Basis.Z):
                seen.add((oa.bit, ob.bit))
        assert seen == {(0, 1), (1, 0)}
        rng = make_rng(11)
        for _ in range(200):
            oa, post = measure_atom(s, "A", Basis.Z, rng)
            ob, _ = measure_atom(post, "B", Basis.Z, rng)
            assert oa.bit ^ ob.bit == 1

    @pytest.mark.parametrize("label", list(ProductLabel))
    def test_collapse_makes_partner_deterministic(self, label):
        s = evolve_cavity(prepare_product(label))
        for _, _, post in atom_branches(s, "A", Basis.Z):
            (only,) = atom_branches(post, "B", Basis.Z)
            assert only[1] == pytest.approx(1.0, abs=1e-12)

    @pytest.mark.parametrize("label", list(ProductLabel))
    def test_frequencies_within_3_sigma(self, label):
        n = 100_000
        rng = make_rng(2024 + label.value)
        s = evolve_cavity(prepare_product(label))
        g = sum(measure_atom(s, "A", Basis.Z, rng)[0] is AtomLabel.G for _ in range(n))
        assert abs(g / n - 0.5) <= sigma3(0.5, n)

    @settings(max_examples=200, deadline=None)
    @given(two_atom_states(), st.sampled_from(["A", "B"]), st.sampled_from(list(Basis)), st.integers(0, 2**32))
    def test_sampled_branch_matches_enumeration(self, state, which, basis, seed):
        """Scalar sampler and the projector enumeration agree on every branch."""
        branches = {o: (p, post) for o, p, post in atom_branches(state, which, basis)}
        assert sum(p for p, _ in branches.values()) == pytest.approx(1.0, abs=1e-9)
        outcome, post = measure_atom(state, which, basis, make_rng(seed))
        assert outcome in branches
        assert abs(post.norm() - 1) <= 1e-12
        assert np.allclose(post.amps, branches[outcome][1].amps, atol=1e-12)

    def test_degenerate_branch_never_taken(self):
        # p(G) is far below the cutoff; the E branch must be chosen without a draw
        s = TwoAtomState([1e-14, 0, 1, 0])
        for seed in range(20):
            outcome, post = measure_atom(s, "A", Basis.Z, make_rng(seed))
            assert outcome is AtomLabel.E
            assert np.all(np.isfinite(post.amps))

    def test_bad_which(self):
        with pytest.raises(ValueError):
            measure_atom(prepare_product(ProductLabel.GG), "C", Basis.Z, make_rng(0))


class TestMeasureSingle:
    def test_eigenstates(self):
        rng = make_rng(1)
        for _ in range(20):
            assert measure_single(prepare_decoy(AtomLabel.PLUS), Basis.X, rng) is AtomLabel.PLUS
            assert measure_single(prepare_decoy(AtomLabel.E), Basis.Z, rng) is AtomLabel.E
            assert measure_single(prepare_decoy(AtomLabel.MINUS), Basis.X, rng) is AtomLabel.MINUS

    def test_g_in_x_basis_is_fair(self):
        # oracle: |<+|g>|^2 from the inner product
        plus = np.array([1, 1]) / math.sqrt(2)
        p_plus = abs(np.vdot(plus, prepare_decoy(AtomLabel.G).as_array())) ** 2
        assert p_plus == pytest.approx(0.5, abs=1e-15)
        n = 100_000
        rng = make_rng(5)
        hits = sum(
            measure_single(prepare_decoy(AtomLabel.G), Basis.X, rng) is AtomLabel.PLUS
            for _ in range(n)
        )
        assert abs(hits / n - p_plus) <= sigma3(p_plus, n)

    def test_rejects_unnormalized(self):
        with pytest.raises(ValueError):
            measure_single(SingleAtomState(1, 1), Basis.Z, make_rng(0))


def test_same_seed_same_outcomes():
    def outcomes(seed):
        rng = make_rng(seed)
        s = evolve_cavity(prepare_product(ProductLabel.EE))
        out = []
        for i in range(500):
            basis = Basis.Z if i % 2 else Basis.X
            out.append(measure_atom(s, "A" if i % 3 else "B", basis, rng)[0].value)
            out.append(measure_single(prepare_decoy(AtomLabel.G), Basis.X, rng).value)
        return "".join(out).encode()

    assert outcomes(99) == outcomes(99)
    assert outcomes(99) != outcomes(100)


def test_equal_up_to_phase():
    a = np.array([1, 1j, 0, 0]) / math.sqrt(2)
    assert equal_up_to_phase(a * np.exp(0.7j), a)
    assert not equal_up_to_phase(np.array([1, -1j, 0, 0]) / math.sqrt(2), a)


class TestUniformInts:
    def test_rejects_non_power_of_two(self):
        with pytest.raises(ValueError):
            uniform_ints(make_rng(0), 3, 5)

    @pytest.mark.parametrize("k", [2, 4])
    def test_frequencies(self, k):
        n = 100_000
        draws = uniform_ints(make_rng(k), k, n)
        assert set(draws) == set(range(k))
        for v in range(k):
            assert abs(draws.count(v) / n - 1 / k) <= sigma3(1 / k, n)


def test_cached_evolution_matches_matrix_product():
    for label in ProductLabel:
        fresh = TwoAtomState(np.array(prepare_product(label).amps))
        assert fresh is not prepare_product(label)
        assert np.array_equal(evolve_cavity(fresh).amps, evolve_cavity(prepare_product(label)).amps)
        assert np.array_equal(evolve_cavity(fresh).amps, cavity_unitary()[:, label.value])
