"""Ensemble binary format and molecule/context text formats."""
import numpy as np
import pytest

from lpqc.molecules import MoleculeError, MoleculeRecord, NormalizationContext
from lpqc.rng import philox
from lpqc.storage import (
    EnsembleFormatError,
    ensemble_as_density_matrices,
    read_context,
    read_ensemble,
    read_molecules,
    write_context,
    write_ensemble,
    write_molecules,
)


def random_mixed(rng, count, dim):
    a = rng.normal(size=(count, dim, dim)) + 1j * rng.normal(size=(count, dim, dim))
    rho = a @ a.conj().transpose(0, 2, 1)
    return rho / np.einsum("bii->b", rho).real[:, None, None]


def random_pure(rng, count, dim):
    psi = rng.normal(size=(count, dim)) + 1j * rng.normal(size=(count, dim))
    return psi / np.linalg.norm(psi, axis=1)[:, None]


class TestEnsembleFile:
    def test_mixed_round_trip_bit_exact(self, tmp_path):
        states = random_mixed(philox(1), 5, 4)
        path = tmp_path / "mixed.lpqe"
        write_ensemble(path, states, n_data=2, m_anc=1)
        data = read_ensemble(path)
        assert data.mixed and data.n_data == 2 and data.m_anc == 1
        np.testing.assert_array_equal(data.states, states)

    def test_pure_round_trip(self, tmp_path):
        states = random_pure(philox(2), 6, 8)
        path = tmp_path / "pure.lpqe"
        write_ensemble(path, states, n_data=3)
        data = read_ensemble(path)
        assert not data.mixed
        np.testing.assert_array_equal(data.states, states)
        dms = ensemble_as_density_matrices(data)
        assert dms.shape == (6, 8, 8)
        np.testing.assert_allclose(np.einsum("bii->b", dms).real, 1.0, atol=1e-12)

    def test_truncated_file_names_offset(self, tmp_path):
        states = random_pure(philox(3), 4, 4)
        path = tmp_path / "trunc.lpqe"
        write_ensemble(path, states, n_data=2)
        blob = path.read_bytes()
        path.write_bytes(blob[:-7])
        with pytest.raises(EnsembleFormatError, match="offset"):
            read_ensemble(path)

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "bad.lpqe"
        path.write_bytes(b"WHAT" + b"\0" * 40)
        with pytest.raises(EnsembleFormatError, match="magic"):
            read_ensemble(path)

    def test_invalid_pure_state_rejected_on_load(self, tmp_path):
        states = random_pure(philox(4), 3, 4)
        states[1] *= 1.5  # break the norm
        path = tmp_path / "invalid.lpqe"
        write_ensemble(path, states, n_data=2)
        with pytest.raises(EnsembleFormatError, match="state 1"):
            read_ensemble(path)
        data = read_ensemble(path, validate=False)
        assert data.states.shape == (3, 4)


class TestMoleculeFiles:
    def test_round_trip(self, tmp_path):
        rng = philox(5)
        mols = [
            MoleculeRecord(("C", "O"), rng.uniform(-1, 1, (2, 3))),
            MoleculeRecord(("N",), rng.uniform(-1, 1, (1, 3))),
        ]
        path = tmp_path / "mols.txt"
        write_molecules(path, mols)
        back, errors = read_molecules(path)
        assert not errors and len(back) == 2
        for a, b in zip(mols, back):
            assert a.elements == b.elements
            np.testing.assert_allclose(a.positions, b.positions, atol=1e-9)

    def test_malformed_atom_line_names_record(self, tmp_path):
        path = tmp_path / "bad.txt"
        path.write_text("1\nC 0 0 0\n2\nN 0 zero 0\nO 1 1 1\n")
        with pytest.raises(MoleculeError, match="record 1"):
            read_molecules(path)
        mols, errors = read_molecules(path, on_error="collect")
        assert len(mols) == 1 and len(errors) == 1 and "record 1" in errors[0]


def test_context_round_trip(tmp_path):
    ctx = NormalizationContext(np.array([-3.93, -4.54, -5.11]), 10.36)
    path = tmp_path / "ctx.yaml"
    write_context(path, ctx)
    back = read_context(path)
    np.testing.assert_allclose(back.v_min, ctx.v_min)
    assert back.delta == pytest.approx(ctx.delta)
