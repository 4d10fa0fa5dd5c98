"""On-disk formats: binary state ensembles, molecule text files, contexts.

Ensemble file (all integers and floats little-endian):

    magic "LPQE" | version u16 = 1 | flags u16 (bit 0: mixed) |
    n_data u16 | m_anc u16 | count u32 | payload

Payload per state: interleaved (re, im) float64 — 2^n_data amplitudes for
pure ensembles, a row-major 2^n_data x 2^n_data matrix for mixed ones.
States are validated on read (unit norm / density-matrix invariants).

Molecule text file: records of one count line followed by that many atom
lines "ELEMENT x y z" (angstroms). The normalization context is a small
YAML file with keys ``v_min`` (3 floats) and ``delta``.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np
import yaml

from .circuits import validate_density_matrix, validate_state_vector
from .molecules import MoleculeError, MoleculeRecord, NormalizationContext

_MAGIC = b"LPQE"
_VERSION = 1
_FLAG_MIXED = 1


class EnsembleFormatError(ValueError):
    pass


@dataclass
class EnsembleData:
    n_data: int
    m_anc: int
    mixed: bool
    states: np.ndarray  # (count, dim) pure amplitudes or (count, D, D) matrices


def write_ensemble(path, states: np.ndarray, n_data: int, m_anc: int = 0) -> None:
    states = np.asarray(states, dtype=np.complex128)
    dim = 2**n_data
    if states.ndim == 3 and states.shape[1:] == (dim, dim):
        mixed = True
    elif states.ndim == 2 and states.shape[1] == dim:
        mixed = False
    else:
        raise EnsembleFormatError(
            f"states shape {states.shape} fits neither pure ({dim},) nor mixed ({dim},{dim})"
        )
    flags = _FLAG_MIXED if mixed else 0
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<HHHHI", _VERSION, flags, n_data, m_anc, states.shape[0]))
        interleaved = np.empty(states.size * 2)
        interleaved[0::2] = states.real.ravel()
        interleaved[1::2] = states.imag.ravel()
        fh.write(interleaved.astype("<f8").tobytes())


def read_ensemble(path, validate: bool = True) -> EnsembleData:
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:4] != _MAGIC:
        raise EnsembleFormatError(f"{path}: bad magic {blob[:4]!r}")
    header_size = 4 + struct.calcsize("<HHHHI")
    if len(blob) < header_size:
        raise EnsembleFormatError(f"{path}: truncated header at offset {len(blob)}")
    version, flags, n_data, m_anc, count = struct.unpack("<HHHHI", blob[4:header_size])
    if version != _VERSION:
        raise EnsembleFormatError(f"{path}: unsupported version {version}")
    mixed = bool(flags & _FLAG_MIXED)
    dim = 2**n_data
    per_state = dim * dim if mixed else dim
    expected = header_size + 16 * per_state * count
    if len(blob) != expected:
        raise EnsembleFormatError(
            f"{path}: payload ends at offset {len(blob)}, expected {expected}"
        )
    raw = np.frombuffer(blob, dtype="<f8", offset=header_size)
    states = (raw[0::2] + 1j * raw[1::2]).astype(np.complex128)
    states = states.reshape((count, dim, dim) if mixed else (count, dim))
    if validate:
        for idx in range(count):
            try:
                if mixed:
                    validate_density_matrix(states[idx])
                else:
                    validate_state_vector(states[idx])
            except ValueError as exc:
                raise EnsembleFormatError(f"{path}: state {idx} invalid: {exc}") from exc
    return EnsembleData(n_data, m_anc, mixed, states)


def ensemble_as_density_matrices(data: EnsembleData) -> np.ndarray:
    """(count, D, D) view: pure ensembles become projectors."""
    if data.mixed:
        return data.states
    return data.states[:, :, None] * data.states.conj()[:, None, :]


# --- molecule text files --------------------------------------------------------


def read_molecules(path, on_error: str = "raise"):
    """Parse molecule records; returns (molecules, errors).

    ``on_error='collect'`` skips malformed records and reports
    "record <idx>: <reason>" strings instead of raising.
    """
    with open(path, "r", encoding="utf-8") as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    molecules: list[MoleculeRecord] = []
    errors: list[str] = []
    pos = 0
    record = 0
    while pos < len(lines):
        try:
            try:
                count = int(lines[pos])
            except ValueError as exc:
                raise MoleculeError(f"bad atom-count line {lines[pos]!r}") from exc
            if pos + count > len(lines) - 1:
                raise MoleculeError(f"{count} atom lines promised, file ends early")
            elements = []
            coords = []
            for ln in lines[pos + 1 : pos + 1 + count]:
                parts = ln.split()
                if len(parts) != 4:
                    raise MoleculeError(f"bad atom line {ln!r}")
                elements.append(parts[0])
                try:
                    coords.append([float(v) for v in parts[1:]])
                except ValueError as exc:
                    raise MoleculeError(f"bad coordinates in {ln!r}") from exc
            molecules.append(MoleculeRecord(tuple(elements), np.array(coords)))
        except MoleculeError as exc:
            if on_error == "raise":
                raise MoleculeError(f"record {record}: {exc}") from exc
            errors.append(f"record {record}: {exc}")
            try:
                count = max(int(lines[pos]), 0)
            except ValueError:
                count = 0
        pos += 1 + max(count, 0)
        record += 1
    return molecules, errors


def write_molecules(path, molecules) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for mol in molecules:
            fh.write(f"{mol.n_atoms}\n")
            for el, xyz in zip(mol.elements, mol.positions):
                fh.write(f"{el} {xyz[0]:.10f} {xyz[1]:.10f} {xyz[2]:.10f}\n")


def read_context(path) -> NormalizationContext:
    with open(path, "r", encoding="utf-8") as fh:
        data = yaml.safe_load(fh)
    if not isinstance(data, dict) or "v_min" not in data or "delta" not in data:
        raise MoleculeError(f"{path}: context file needs 'v_min' and 'delta'")
    return NormalizationContext(np.asarray(data["v_min"], dtype=np.float64),
                                float(data["delta"]))


def write_context(path, ctx: NormalizationContext) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        yaml.safe_dump({"v_min": [float(v) for v in ctx.v_min], "delta": float(ctx.delta)}, fh)


def write_graph_report(path, graphs) -> None:
    """Text listing of adjacency, bond orders, and implicit hydrogens."""
    with open(path, "w", encoding="utf-8") as fh:
        for idx, g in enumerate(graphs):
            fh.write(f"molecule {idx}: atoms={','.join(g.elements)} "
                     f"connected={'yes' if g.connected else 'NO'}\n")
            m = len(g.elements)
            for i in range(m):
                for j in range(i + 1, m):
                    if g.bond_orders[i, j]:
                        fh.write(f"  bond {i}-{j} order {int(g.bond_orders[i, j])}\n")
            fh.write("  implicit_h " + " ".join(str(int(h)) for h in g.implicit_h) + "\n")
