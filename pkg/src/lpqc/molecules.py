"""Molecule <-> quantum-state amplitude codec and molecular-graph recovery.

Encoding (heavy atoms C/N/O/F, at most 9, onto 7 qubits):

1. canonical atom order is accepted as given (computed upstream);
2. center at the centroid, rotate the first atom onto +z (Rodrigues);
3. normalize coordinates against a global bounding box (v_min, delta);
4. per atom i a 7-vector (x, y, z, one-hot element);
5. an auxiliary entry alpha_i = sqrt(max(0, 3 - |v_i|^2)) per atom, which
   tops every atom's squared-norm contribution up to exactly 4;
6. concatenate blocks, zero-pad to 127 slots, bookkeeping slot 127, and
   divide by 2 sqrt(m).

With the bookkeeping slot left at zero the result has exactly unit norm
(m atoms x 4 / (2 sqrt(m))^2 = 1). Storing the atom count in slot 127, as
an optional mode, breaks that identity, so that mode renormalizes the full
vector and decoding recovers m from occupancy rather than the slot.

Decoding reads elementwise moduli, finds the occupied atom count by
thresholding rescaled one-hot mass (tau = 0.4), rescales by 2 sqrt(m),
recovers types by argmax and positions by the affine inverse (the "paper2x"
mode doubles the box scale; "strict1x" is the exact inverse). Bond
inference thresholds pairwise distances at 2.2 x the covalent-radius sum
under max-valence gating, and valence completion promotes bond orders via
repeated maximum matching on the unsaturated subgraph.
"""
from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

import numpy as np

ELEMENTS = ("C", "N", "O", "F")
MAX_VALENCE = {"C": 4, "N": 3, "O": 2, "F": 1}
# Standard single-bond covalent radii in angstroms; overridable per call.
COVALENT_RADIUS = {"C": 0.76, "N": 0.71, "O": 0.66, "F": 0.57}
BOND_SCALE = 2.2
MAX_BOND_ORDER = 3

N_QUBITS = 7
STATE_DIM = 2**N_QUBITS
MAX_ATOMS = 9
OCCUPANCY_TAU = 0.4


class MoleculeError(ValueError):
    pass


@dataclass(frozen=True)
class MoleculeRecord:
    elements: tuple[str, ...]
    positions: np.ndarray  # (m, 3) angstroms

    def __post_init__(self) -> None:
        pos = np.asarray(self.positions, dtype=np.float64)
        if pos.shape != (len(self.elements), 3):
            raise MoleculeError(f"positions shape {pos.shape} does not match atom count")
        if not 1 <= len(self.elements) <= MAX_ATOMS:
            raise MoleculeError(f"atom count {len(self.elements)} outside 1..{MAX_ATOMS}")
        for el in self.elements:
            if el not in ELEMENTS:
                raise MoleculeError(f"unsupported element {el!r}")
        object.__setattr__(self, "positions", pos)

    @property
    def n_atoms(self) -> int:
        return len(self.elements)


@dataclass(frozen=True)
class NormalizationContext:
    v_min: np.ndarray  # (3,) angstroms
    delta: float  # scalar bounding-box side, angstroms

    def __post_init__(self) -> None:
        v = np.asarray(self.v_min, dtype=np.float64)
        if v.shape != (3,):
            raise MoleculeError("v_min must be a 3-vector")
        if self.delta <= 0:
            raise MoleculeError("delta must be positive")
        object.__setattr__(self, "v_min", v)


def rotation_to_z(direction: np.ndarray) -> np.ndarray:
    """Rodrigues rotation taking ``direction`` to +z."""
    a = np.asarray(direction, dtype=np.float64)
    norm = np.linalg.norm(a)
    if norm < 1e-12:
        return np.eye(3)
    a = a / norm
    z = np.array([0.0, 0.0, 1.0])
    c = float(a @ z)
    if c > 1.0 - 1e-14:
        return np.eye(3)
    if c < -1.0 + 1e-14:
        return np.diag([1.0, -1.0, -1.0])  # pi turn about x
    axis = np.cross(a, z)
    s = np.linalg.norm(axis)
    kx = np.array([
        [0.0, -axis[2], axis[1]],
        [axis[2], 0.0, -axis[0]],
        [-axis[1], axis[0], 0.0],
    ])
    return np.eye(3) + kx + kx @ kx * ((1 - c) / s**2)


def canonical_frame(mol: MoleculeRecord) -> MoleculeRecord:
    """Center at the centroid and align the first atom with +z.

    Idempotent; if the first atom sits at the centroid the rotation is
    skipped.
    """
    pos = mol.positions - mol.positions.mean(axis=0)
    rot = rotation_to_z(pos[0])
    return MoleculeRecord(mol.elements, pos @ rot.T)


def encode_molecule(
    mol: MoleculeRecord,
    ctx: NormalizationContext,
    store_count: bool = False,
    apply_frame: bool = True,
) -> np.ndarray:
    """Amplitude vector of the encoded molecule, length 128.

    Unit norm within 1e-9 when ``store_count`` is off; with the bookkeeping
    slot populated the vector is renormalized instead.
    """
    if apply_frame:
        mol = canonical_frame(mol)
    m = mol.n_atoms
    normalized = (mol.positions - ctx.v_min) / ctx.delta
    vec = np.zeros(STATE_DIM)
    for i in range(m):
        block = 7 * i
        vec[block : block + 3] = normalized[i]
        vec[block + 3 + ELEMENTS.index(mol.elements[i])] = 1.0
    r2 = np.sum(normalized**2, axis=1)
    vec[7 * m : 7 * m + m] = np.sqrt(np.maximum(0.0, 3.0 - r2))
    if store_count:
        vec[STATE_DIM - 1] = m
    vec /= 2.0 * np.sqrt(m)
    if store_count:
        vec /= np.linalg.norm(vec)
    return vec


def _type_sums(x: np.ndarray) -> np.ndarray:
    """Per-block one-hot mass, blocks 0..MAX_ATOMS-1."""
    return np.array([x[7 * i + 3 : 7 * i + 7].sum() for i in range(MAX_ATOMS)])


def _alpha_mismatch(x: np.ndarray, m: int) -> float:
    """Mean gap between the stored auxiliary block and its defining identity.

    For the true atom count the entries at [7m, 7m+m) are exactly
    sqrt(max(0, 3 - |v_i|^2)); a wrong candidate reads atom data (or zeros)
    there instead, which the identity exposes.
    """
    scale = 2.0 * np.sqrt(m)
    stored = scale * x[7 * m : 7 * m + m]
    gaps = []
    for i in range(m):
        pos = scale * x[7 * i : 7 * i + 3]
        predicted = np.sqrt(max(0.0, 3.0 - float(np.sum(pos**2))))
        gaps.append(abs(float(stored[i]) - predicted))
    return float(np.mean(gaps))


def detect_atom_count(x: np.ndarray, tau: float = OCCUPANCY_TAU) -> int:
    """Occupied-slot count from thresholded one-hot mass.

    A candidate count m must have rescaled (by 2 sqrt(m)) type mass above
    tau in blocks 0..m-1 and below tau in every later type slot outside the
    auxiliary region [7m, 7m+m). The auxiliary block aliases into scanned
    type slots for m >= 4, so a plain first-below-threshold scan would
    miscount there; candidates are therefore also screened against the
    auxiliary identity alpha_i = sqrt(3 - |v_i|^2), which distinguishes a
    genuine auxiliary block from atom data. The smallest candidate passing
    all checks wins; noisy inputs fall back to the threshold-only scans.
    """
    x = np.abs(np.asarray(x)).astype(np.float64)
    sums = _type_sums(x)

    def threshold_consistent(m: int) -> bool:
        scale = 2.0 * np.sqrt(m)
        if np.any(scale * sums[:m] <= tau):
            return False
        aux_lo, aux_hi = 7 * m, 7 * m + m
        for i in range(m, MAX_ATOMS):
            slots = [p for p in range(7 * i + 3, 7 * i + 7) if not aux_lo <= p < aux_hi]
            if scale * x[slots].sum() > tau:
                return False
        return True

    candidates = [m for m in range(1, MAX_ATOMS + 1) if threshold_consistent(m)]
    for m in candidates:
        if _alpha_mismatch(x, m) <= 0.25:
            return m
    if candidates:
        return candidates[0]
    for i in range(MAX_ATOMS):  # last resort: first block below threshold
        if 2.0 * np.sqrt(i + 1) * sums[i] <= tau:
            if i == 0:
                raise MoleculeError("empty molecule: no occupied atom slot")
            return i
    return MAX_ATOMS


def decode_state(
    state: np.ndarray,
    ctx: NormalizationContext,
    scale_mode: str = "paper2x",
    m_override: int | None = None,
    tau: float = OCCUPANCY_TAU,
) -> tuple[np.ndarray, tuple[str, ...]]:
    """Positions (angstroms) and element labels read back from amplitudes."""
    if scale_mode not in ("paper2x", "strict1x"):
        raise MoleculeError(f"unknown scale mode {scale_mode!r}")
    x = np.abs(np.asarray(state)).astype(np.float64)
    if x.shape != (STATE_DIM,):
        raise MoleculeError(f"expected a {STATE_DIM}-amplitude state, got {x.shape}")
    if m_override is not None:
        if not 1 <= m_override <= MAX_ATOMS:
            raise MoleculeError(f"atom-count override {m_override} outside 1..{MAX_ATOMS}")
        m = m_override
    else:
        m = detect_atom_count(x, tau=tau)
    rescaled = 2.0 * np.sqrt(m) * x
    positions = np.zeros((m, 3))
    elements = []
    box = 2.0 * ctx.delta if scale_mode == "paper2x" else ctx.delta
    for i in range(m):
        block = 7 * i
        positions[i] = box * rescaled[block : block + 3] + ctx.v_min
        elements.append(ELEMENTS[int(np.argmax(rescaled[block + 3 : block + 7]))])
    return positions, tuple(elements)


@dataclass
class BondGraph:
    adjacency: np.ndarray  # (m, m) 0/1 symmetric
    connected: bool


@dataclass
class MolecularGraph:
    elements: tuple[str, ...]
    adjacency: np.ndarray
    bond_orders: np.ndarray  # (m, m) symmetric integers
    implicit_h: np.ndarray  # per-atom remaining valence
    connected: bool


def infer_bonds(
    positions: np.ndarray,
    elements: tuple[str, ...],
    radii: dict[str, float] | None = None,
    scale: float = BOND_SCALE,
) -> BondGraph:
    """Covalent-radius distance thresholding with max-valence gating.

    Pairs are processed in increasing-distance order (ties broken by index)
    so the valence gate is deterministic; a bond is added only while both
    endpoints stay below their maximum valence.
    """
    radii = radii or COVALENT_RADIUS
    pos = np.asarray(positions, dtype=np.float64)
    m = len(elements)
    if pos.shape != (m, 3) or m < 1:
        raise MoleculeError("positions and elements disagree")
    adjacency = np.zeros((m, m), dtype=np.int64)
    degree = np.zeros(m, dtype=np.int64)
    pairs = sorted(
        combinations(range(m), 2),
        key=lambda ij: (np.linalg.norm(pos[ij[0]] - pos[ij[1]]), ij),
    )
    for i, j in pairs:
        d = np.linalg.norm(pos[i] - pos[j])
        if d > scale * (radii[elements[i]] + radii[elements[j]]):
            continue
        if degree[i] >= MAX_VALENCE[elements[i]] or degree[j] >= MAX_VALENCE[elements[j]]:
            continue
        adjacency[i, j] = adjacency[j, i] = 1
        degree[i] += 1
        degree[j] += 1
    # connectivity check (single atoms count as connected)
    seen = {0}
    frontier = [0]
    while frontier:
        k = frontier.pop()
        for other in np.flatnonzero(adjacency[k]):
            if other not in seen:
                seen.add(int(other))
                frontier.append(int(other))
    return BondGraph(adjacency, len(seen) == m)


def _max_cardinality_matching(nodes: list[int], edges: list[tuple[int, int]]):
    """Exact maximum matching, lexicographically smallest among maximums.

    Graphs here have at most 9 vertices, so exhaustive branching (include or
    skip each edge in sorted order) is cheap and handles odd cycles exactly.
    """
    edges = sorted(edges)
    best: list[tuple[int, int]] = []

    def recurse(idx: int, used: set[int], chosen: list[tuple[int, int]]) -> None:
        nonlocal best
        remaining = len(edges) - idx
        if len(chosen) + remaining < len(best):
            return
        if idx == len(edges):
            if len(chosen) > len(best):
                best = list(chosen)
            return
        i, j = edges[idx]
        if i not in used and j not in used:
            used.add(i)
            used.add(j)
            chosen.append((i, j))
            recurse(idx + 1, used, chosen)
            chosen.pop()
            used.discard(i)
            used.discard(j)
        recurse(idx + 1, used, chosen)

    recurse(0, set(), [])
    return best


def complete_valences(
    adjacency: np.ndarray, elements: tuple[str, ...], connected: bool = True
) -> MolecularGraph:
    """Promote bond orders by repeated matching on the unsaturated subgraph.

    Each round runs a maximum-cardinality matching over edges whose both
    endpoints still have spare valence (bond order capped at 3) and
    increments the matched bonds; leftover deficiencies become implicit
    hydrogens. Bond orders never decrease and the loop ends within the sum
    of initial deficiencies.
    """
    adjacency = np.asarray(adjacency, dtype=np.int64)
    m = len(elements)
    bond_orders = adjacency.copy()
    valences = np.array([MAX_VALENCE[e] for e in elements])
    while True:
        deficits = valences - bond_orders.sum(axis=1)
        unsaturated = set(np.flatnonzero(deficits > 0).tolist())
        edges = [
            (i, j)
            for i in range(m)
            for j in range(i + 1, m)
            if adjacency[i, j]
            and i in unsaturated
            and j in unsaturated
            and bond_orders[i, j] < MAX_BOND_ORDER
        ]
        matching = _max_cardinality_matching(sorted(unsaturated), edges)
        if not matching:
            break
        for i, j in matching:
            bond_orders[i, j] += 1
            bond_orders[j, i] += 1
    implicit_h = valences - bond_orders.sum(axis=1)
    return MolecularGraph(tuple(elements), adjacency, bond_orders, implicit_h, connected)


def decode_to_graph(
    state: np.ndarray,
    ctx: NormalizationContext,
    scale_mode: str = "paper2x",
    m_override: int | None = None,
) -> MolecularGraph:
    """Full decode: amplitudes -> geometry -> bonds -> bond orders."""
    positions, elements = decode_state(state, ctx, scale_mode, m_override)
    bonds = infer_bonds(positions, elements)
    return complete_valences(bonds.adjacency, elements, bonds.connected)
