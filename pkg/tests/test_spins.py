import numpy as np
import pytest

from spinweave.operators import commutator, frobenius_magnitude, kron
from spinweave.spins import (
    DEFAULT_COUPLING_SIGMA_HZ,
    SpinSystem,
    collective_operator,
    coupling_from_geometry,
    dipolar_hamiltonian,
    dq_hamiltonian,
    embedded_spin,
    internal_hamiltonian,
    offset_hamiltonian,
    sample_couplings,
    sample_disorder,
    spin_operator,
)

TWO_PI = 2 * np.pi


def kron_dipolar_oracle(system):
    """Independent H_D construction from embedded operator products."""
    n = system.n_spins
    h = np.zeros((system.dim, system.dim), dtype=complex)
    for i in range(n):
        for j in range(i + 1, n):
            d = TWO_PI * system.couplings_hz[i, j]
            zz = embedded_spin(n, i, "z") @ embedded_spin(n, j, "z")
            dot = sum(
                embedded_spin(n, i, a) @ embedded_spin(n, j, a) for a in "xyz"
            )
            h += d * (3 * zz - dot)
    return h


class TestCollectiveOperators:
    def test_single_spin_z(self):
        assert np.allclose(collective_operator(1, "z"), np.diag([0.5, -0.5]))

    def test_two_spin_z_additivity(self):
        assert np.allclose(collective_operator(2, "z"), np.diag([1.0, 0.0, 0.0, -1.0]))

    def test_su2_commutator_three_spins(self):
        sx = collective_operator(3, "x")
        sy = collective_operator(3, "y")
        sz = collective_operator(3, "z")
        assert np.abs(commutator(sx, sy) - 1j * sz).max() < 1e-14

    @pytest.mark.parametrize("axis", ["x", "y", "z"])
    @pytest.mark.parametrize("n", [1, 2, 4])
    def test_matches_kron_embedding(self, n, axis):
        oracle = sum(embedded_spin(n, i, axis) for i in range(n))
        assert np.abs(collective_operator(n, axis) - oracle).max() < 1e-15

    def test_rejects_bad_axis(self):
        with pytest.raises(ValueError):
            collective_operator(2, "w")
        with pytest.raises(ValueError):
            spin_operator("q")


class TestDipolarHamiltonian:
    def test_zero_couplings(self):
        sys2 = SpinSystem.create(np.zeros((3, 3)))
        assert np.abs(dipolar_hamiltonian(sys2)).max() == 0.0

    def test_two_spin_eigenvalues(self):
        d_hz = 250.0
        d = TWO_PI * d_hz
        h = dipolar_hamiltonian(SpinSystem.create([[0, d_hz], [d_hz, 0]]))
        eigs = np.sort(np.linalg.eigvalsh(h))
        assert np.allclose(eigs, sorted([d / 2, d / 2, -d, 0.0]), atol=1e-9)

    def test_conserves_total_z(self):
        system = SpinSystem.create(sample_couplings(17, 4, 1500.0))
        h = dipolar_hamiltonian(system)
        sz = collective_operator(4, "z")
        assert np.abs(commutator(h, sz)).max() < 1e-12 * np.abs(h).max()

    def test_traceless(self):
        system = SpinSystem.create(sample_couplings(18, 5, 2000.0))
        h = dipolar_hamiltonian(system)
        assert abs(np.trace(h)) < 1e-12 * frobenius_magnitude(h)

    def test_matches_kron_oracle(self):
        system = SpinSystem.create(sample_couplings(19, 3, 900.0))
        assert np.abs(dipolar_hamiltonian(system) - kron_dipolar_oracle(system)).max() < 1e-9


class TestOffsetHamiltonian:
    def test_zero(self):
        system = SpinSystem.create(np.zeros((2, 2)))
        assert np.abs(offset_hamiltonian(system)).max() == 0.0

    def test_single_spin_scaling(self):
        # a = 2 pi 100 rad/s on one spin contributes +/- pi*100 on the diagonal
        system = SpinSystem.create(np.zeros((2, 2)), chemical_shifts_hz=[100.0, 0.0])
        h = offset_hamiltonian(system)
        assert np.allclose(np.diag(h).real, [np.pi * 100, np.pi * 100, -np.pi * 100, -np.pi * 100])
        assert np.abs(h - np.diag(np.diag(h))).max() == 0.0

    def test_commutes_with_total_z(self):
        system = SpinSystem.create(
            np.zeros((3, 3)), chemical_shifts_hz=[10, -5, 3], disorder_hz=[1, 2, -3],
            global_offset_hz=7.5,
        )
        h = offset_hamiltonian(system)
        assert np.abs(commutator(h, collective_operator(3, "z"))).max() < 1e-12

    def test_sums_all_offset_sources(self):
        system = SpinSystem.create(
            np.zeros((2, 2)), chemical_shifts_hz=[5, 0], disorder_hz=[2, -1],
            global_offset_hz=10,
        )
        assert np.allclose(system.total_offsets_hz, [17.0, 9.0])
        oracle = sum(
            TWO_PI * a * embedded_spin(2, i, "z") for i, a in enumerate([17.0, 9.0])
        )
        assert np.abs(offset_hamiltonian(system) - oracle).max() < 1e-12
        assert np.abs(internal_hamiltonian(system) - offset_hamiltonian(system)).max() == 0.0


class TestDqHamiltonian:
    def test_zero(self):
        assert np.abs(dq_hamiltonian(SpinSystem.create(np.zeros((2, 2))))).max() == 0.0

    def test_two_spin_elements(self):
        j_hz = 120.0
        h = dq_hamiltonian(SpinSystem.create([[0, j_hz], [j_hz, 0]]))
        expected = np.zeros((4, 4), dtype=complex)
        expected[0, 3] = expected[3, 0] = TWO_PI * j_hz / 4.0
        assert np.abs(h - expected).max() < 1e-12

    def test_delta_m_two_selection(self):
        system = SpinSystem.create(sample_couplings(23, 4, 800.0))
        h = dq_hamiltonian(system)
        m = np.diag(collective_operator(4, "z")).real
        delta = np.round(m[:, None] - m[None, :]).astype(int)
        assert np.abs(h[np.abs(delta) != 2]).max() == 0.0

    def test_parity_conjugation_invariance(self):
        system = SpinSystem.create(sample_couplings(29, 3, 650.0))
        h = dq_hamiltonian(system)
        phases = np.exp(1j * np.pi * np.diag(collective_operator(3, "z")).real)
        conjugated = (phases[:, None] * h) * phases.conj()[None, :]
        assert np.abs(conjugated - h).max() < 1e-12 * max(np.abs(h).max(), 1.0)

    def test_matches_kron_oracle(self):
        system = SpinSystem.create(sample_couplings(31, 3, 500.0))
        n = 3
        oracle = np.zeros((8, 8), dtype=complex)
        for i in range(n):
            for j in range(i + 1, n):
                jj = TWO_PI * system.couplings_hz[i, j]
                oracle += 0.5 * jj * (
                    embedded_spin(n, i, "x") @ embedded_spin(n, j, "x")
                    - embedded_spin(n, i, "y") @ embedded_spin(n, j, "y")
                )
        assert np.abs(dq_hamiltonian(system) - oracle).max() < 1e-9


class TestCouplingFromGeometry:
    def test_magic_angle(self):
        assert coupling_from_geometry(1.0, np.arccos(1 / np.sqrt(3))) == pytest.approx(0.0, abs=1e-12)

    def test_parallel_vs_perpendicular_ratio(self):
        r = 2e-10
        assert coupling_from_geometry(r, 0.0) / coupling_from_geometry(r, np.pi / 2) == pytest.approx(-2.0)

    def test_inverse_cube(self):
        assert coupling_from_geometry(2e-10, np.pi / 2) / coupling_from_geometry(4e-10, np.pi / 2) == pytest.approx(8.0)

    def test_rejects_nonpositive_distance(self):
        with pytest.raises(ValueError):
            coupling_from_geometry(0.0, 0.1)


class TestSampling:
    def test_default_sigma_constant(self):
        assert DEFAULT_COUPLING_SIGMA_HZ == pytest.approx(5000.0 / 3.0)

    def test_coupling_determinism_and_shape(self):
        a = sample_couplings(42, 5, 1000.0)
        b = sample_couplings(42, 5, 1000.0)
        assert np.array_equal(a, b)
        assert np.array_equal(a, a.T)
        assert np.abs(np.diag(a)).max() == 0.0
        assert not np.array_equal(a, sample_couplings(43, 5, 1000.0))

    def test_coupling_half_normal_moment(self):
        # mean |d| over ~1e5 draws approximates sigma sqrt(2/pi)
        sigma = 1700.0
        draws = np.concatenate(
            [sample_couplings(s, 10, sigma)[np.triu_indices(10, 1)] for s in range(2300)]
        )
        assert draws.size > 100_000
        assert np.abs(draws).mean() == pytest.approx(sigma * np.sqrt(2 / np.pi), rel=0.02)

    def test_disorder_zero_sigma(self):
        assert np.abs(sample_disorder(7, 6, 0.0)).max() == 0.0

    def test_disorder_endpoint_sigmas_accepted(self):
        for sigma in (0.5, 5000.0):
            assert sample_disorder(11, 4, sigma).shape == (4,)

    def test_disorder_empirical_sigma(self):
        sigma = 80.0
        draws = np.concatenate([sample_disorder(s, 10, sigma) for s in range(10_000)])
        assert draws.std() == pytest.approx(sigma, rel=0.02)

    def test_disorder_scales_one_fixed_draw(self):
        base = sample_disorder(5, 4, 1.0)
        assert np.allclose(sample_disorder(5, 4, 250.0), 250.0 * base)

    def test_rejects_bad_sigma(self):
        with pytest.raises(ValueError):
            sample_couplings(1, 4, 0.0)
        with pytest.raises(ValueError):
            sample_disorder(1, 4, -1.0)


class TestSpinSystem:
    def test_json_round_trip(self):
        system = SpinSystem.create(
            sample_couplings(3, 4, 500.0),
            chemical_shifts_hz=[1, 2, 3, 4],
            disorder_hz=[-1, 0, 1, 2],
            global_offset_hz=12.5,
        )
        restored = SpinSystem.from_json(system.to_json())
        assert restored.n_spins == 4
        assert np.allclose(restored.couplings_hz, system.couplings_hz)
        assert np.allclose(restored.chemical_shifts_hz, system.chemical_shifts_hz)
        assert np.allclose(restored.disorder_hz, system.disorder_hz)
        assert restored.global_offset_hz == system.global_offset_hz

    def test_validation(self):
        with pytest.raises(ValueError, match="symmetric"):
            SpinSystem.create([[0.0, 1.0], [2.0, 0.0]])
        with pytest.raises(ValueError, match="diagonal"):
            SpinSystem.create([[1.0, 2.0], [2.0, 0.0]])
        with pytest.raises(ValueError, match="n_spins"):
            SpinSystem.create(np.zeros((1, 1)))
        with pytest.raises(ValueError, match="n_spins"):
            SpinSystem.create(np.zeros((11, 11)))
        with pytest.raises(ValueError, match="length"):
            SpinSystem.create(np.zeros((2, 2)), chemical_shifts_hz=[1.0])

    def test_kron_embedding_oracle_for_single_site(self):
        # embedded_spin agrees with an explicit kron chain
        op = embedded_spin(3, 1, "y")
        oracle = kron(kron(np.eye(2), spin_operator("y")), np.eye(2))
        assert np.array_equal(op, oracle)
