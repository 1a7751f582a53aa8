"""
Exciton network model
Site Hamiltonian, coupling constraints, system/bath partition and the
spectral decomposition of the skeleton bath.

Sites are stored 0-based: donor = 0, acceptor = 1, sink = n_sites - 1.
Reports and messages use the 1-based site numbers of the literature.
"""
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field
from scipy.linalg import eigh

from config import settings
from src.errors import FormatError, ParameterError, ValidationError

logger = logging.getLogger(__name__)

DONOR = 0
ACCEPTOR = 1
RATE_ORDERS = ("descending", "ascending")


def _frozen(array: np.ndarray) -> np.ndarray:
    array = np.array(array, dtype=float)
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class ExcitonNetwork:
    """(N+1)-site tight-binding Hamiltonian in cm⁻¹, the last site being the sink"""

    hamiltonian: np.ndarray
    label: str = ""
    site_labels: Tuple[str, ...] = ()

    def __post_init__(self):
        matrix = np.asarray(self.hamiltonian)
        if np.iscomplexobj(matrix):
            raise FormatError("Hamiltonian must be real; complex entries are not supported")
        if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
            raise FormatError(f"Hamiltonian must be a square matrix, got shape {matrix.shape}")
        if not np.all(np.isfinite(matrix)):
            raise FormatError("Hamiltonian contains non-finite entries")
        object.__setattr__(self, "hamiltonian", _frozen(matrix))
        object.__setattr__(self, "site_labels", tuple(self.site_labels))

    @property
    def n_sites(self) -> int:
        return self.hamiltonian.shape[0]

    @property
    def n_pigments(self) -> int:
        return self.n_sites - 1

    @property
    def donor_index(self) -> int:
        return DONOR

    @property
    def acceptor_index(self) -> int:
        return ACCEPTOR

    @property
    def sink_index(self) -> int:
        return self.n_sites - 1


class SinkParameters(BaseModel):
    """Energy, acceptor coupling and decoherence rate of the sink site (cm⁻¹)"""

    model_config = ConfigDict(frozen=True)

    sink_energy: float = Field(default=settings.OPTIMUM_SINK_ENERGY, allow_inf_nan=False)
    acceptor_sink_coupling: float = Field(default=settings.OPTIMUM_SINK_COUPLING, ge=0.0,
                                          allow_inf_nan=False)
    sink_rate: float = Field(default=settings.OPTIMUM_SINK_RATE, gt=0.0, allow_inf_nan=False)


@dataclass(frozen=True)
class Violation:
    kind: str
    sites: Tuple[int, ...]
    value: float
    message: str


@dataclass(frozen=True)
class ValidationReport:
    violations: Tuple[Violation, ...] = ()

    @property
    def is_valid(self) -> bool:
        return not self.violations

    def summary(self) -> str:
        if self.is_valid:
            return "constraints satisfied"
        return "; ".join(v.message for v in self.violations)


@dataclass(frozen=True, eq=False)
class SystemPartition:
    """Donor/acceptor energies, bath block and the coupling vectors |g₁⟩, |g₂⟩"""

    donor_energy: float
    acceptor_energy: float
    bath_block: np.ndarray
    coupling_donor: np.ndarray
    coupling_acceptor: np.ndarray
    sink: SinkParameters

    def __post_init__(self):
        for name in ("bath_block", "coupling_donor", "coupling_acceptor"):
            object.__setattr__(self, name, _frozen(getattr(self, name)))

    @property
    def n_bath(self) -> int:
        return self.bath_block.shape[0]


@dataclass(frozen=True, eq=False)
class BathSpectrum:
    """Eigenpairs of the bath block (ascending), their rates and coupling weights"""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    rates: np.ndarray
    weights_donor: np.ndarray
    weights_acceptor: np.ndarray
    sink_position: int
    rate_order: str = "descending"
    labels: Tuple[int, ...] = field(default=())

    def __post_init__(self):
        for name in ("eigenvalues", "eigenvectors", "rates", "weights_donor", "weights_acceptor"):
            object.__setattr__(self, name, _frozen(getattr(self, name)))

    def reconstruct(self) -> np.ndarray:
        return (self.eigenvectors * self.eigenvalues) @ self.eigenvectors.T

    def weights(self, owner: int) -> np.ndarray:
        return self.weights_donor if owner == DONOR else self.weights_acceptor


NetworkSource = Union[str, Path, Mapping[str, Any]]


def load_network(source: NetworkSource) -> ExcitonNetwork:
    """Read a network document (JSON path or parsed mapping) and validate it"""
    if isinstance(source, Mapping):
        document = source
    else:
        path = Path(source)
        try:
            document = json.loads(path.read_text())
        except json.JSONDecodeError as e:
            raise FormatError(f"{path}: not valid JSON ({e})") from e
        except OSError as e:
            raise FormatError(f"{path}: cannot read network file ({e})") from e

    if not isinstance(document, Mapping) or "hamiltonian" not in document:
        raise FormatError("network document needs a 'hamiltonian' field")

    rows = document["hamiltonian"]
    if not isinstance(rows, list) or not rows or not all(isinstance(r, list) for r in rows):
        raise FormatError("'hamiltonian' must be a row-major array of arrays")
    if any(len(r) != len(rows) for r in rows):
        raise FormatError("Hamiltonian is not square")
    if any(isinstance(x, (complex, str, dict, list)) or isinstance(x, bool) for r in rows for x in r):
        raise FormatError("Hamiltonian entries must be real numbers")

    matrix = np.array(rows, dtype=float)
    n_pigments = document.get("n_pigments")
    if n_pigments is None:
        raise FormatError("network document needs an 'n_pigments' field")
    if int(n_pigments) + 1 != matrix.shape[0]:
        raise FormatError(
            f"missing sink column: {n_pigments} pigments need a "
            f"{int(n_pigments) + 1}x{int(n_pigments) + 1} matrix, got {matrix.shape[0]}x{matrix.shape[0]}"
        )

    net = ExcitonNetwork(
        hamiltonian=matrix,
        label=str(document.get("label", "")),
        site_labels=tuple(document.get("site_labels", ())),
    )
    report = validate_constraints(net)
    if not report.is_valid:
        raise ValidationError(f"invalid network '{net.label}': {report.summary()}", report)
    logger.debug("Loaded network %s with %d sites", net.label, net.n_sites)
    return net


def validate_constraints(net: ExcitonNetwork) -> ValidationReport:
    """List every violated structural constraint; empty report means valid"""
    H = net.hamiltonian
    n = net.n_sites
    scale = float(np.max(np.abs(H))) if H.size else 0.0
    tol = settings.SYMMETRY_TOLERANCE * max(scale, 1.0)
    violations: List[Violation] = []

    if n < 4:
        violations.append(Violation(
            "size", (n,), float(n),
            f"network has {n} sites; donor, acceptor, one bath pigment and a sink need at least 4",
        ))

    for k in range(n):
        for l in range(k + 1, n):
            if abs(H[k, l] - H[l, k]) > tol:
                violations.append(Violation(
                    "symmetry", (k + 1, l + 1), float(H[k, l] - H[l, k]),
                    f"H[{k + 1}][{l + 1}] != H[{l + 1}][{k + 1}]",
                ))

    if n >= 2 and (abs(H[DONOR, ACCEPTOR]) > tol or abs(H[ACCEPTOR, DONOR]) > tol):
        violations.append(Violation(
            "donor-acceptor", (1, 2), float(H[DONOR, ACCEPTOR]),
            f"h(1,2) = {H[DONOR, ACCEPTOR]:g} must vanish",
        ))

    if n >= 3:
        sink = n - 1
        for j in range(n - 1):
            if j == ACCEPTOR:
                continue
            if abs(H[j, sink]) > tol or abs(H[sink, j]) > tol:
                violations.append(Violation(
                    "sink-coupling", (j + 1, n), float(H[j, sink]),
                    f"h({j + 1},{n}) = {H[j, sink]:g} must vanish; only the acceptor couples to the sink",
                ))

    return ValidationReport(tuple(violations))


def partition(net: ExcitonNetwork, sink: SinkParameters) -> SystemPartition:
    """Split the network into donor/acceptor system, bath block and couplings"""
    report = validate_constraints(net)
    if not report.is_valid:
        raise ValidationError(f"cannot partition '{net.label}': {report.summary()}", report)

    H = net.hamiltonian
    bath = np.array(H[2:, 2:], dtype=float)
    bath[-1, :] = 0.0
    bath[:, -1] = 0.0
    bath[-1, -1] = sink.sink_energy

    g1 = np.array(H[DONOR, 2:], dtype=float)
    g1[-1] = 0.0
    g2 = np.array(H[ACCEPTOR, 2:], dtype=float)
    g2[-1] = sink.acceptor_sink_coupling

    return SystemPartition(
        donor_energy=float(H[DONOR, DONOR]),
        acceptor_energy=float(H[ACCEPTOR, ACCEPTOR]),
        bath_block=bath,
        coupling_donor=g1,
        coupling_acceptor=g2,
        sink=sink,
    )


def diagonalize_bath(part: SystemPartition, rates: Sequence[float],
                     rate_order: Optional[str] = None) -> BathSpectrum:
    """
    Spectral decomposition of the bath block with one decoherence rate per eigenstate.

    `rates` lists Γ_α by label α = 3..N (pigment eigenstates) and optionally a
    final entry for α = N+1, the sink; without it the sink rate comes from the
    partition's SinkParameters. Pigment labels follow `rate_order` in energy
    ("descending": α = 3 is the highest pigment eigenstate). The sink eigenpair
    is identified by its eigenvector, never by sort position.
    """
    rate_order = rate_order or settings.RATE_ORDER
    if rate_order not in RATE_ORDERS:
        raise ParameterError(f"rate order must be one of {RATE_ORDERS}, got '{rate_order}'")

    n_bath = part.n_bath
    n_pig = n_bath - 1
    rates = np.asarray(rates, dtype=float).ravel()
    if rates.size == n_pig:
        sink_rate = part.sink.sink_rate
        pigment_rates = rates
    elif rates.size == n_bath:
        sink_rate = float(rates[-1])
        pigment_rates = rates[:-1]
    else:
        raise ParameterError(
            f"expected {n_pig} pigment rates (or {n_bath} including the sink), got {rates.size}"
        )
    if not np.all(np.isfinite(pigment_rates)) or np.any(pigment_rates <= 0) or not sink_rate > 0:
        raise ParameterError(f"decoherence rates must be strictly positive, got {rates.tolist()}")

    pig_values, pig_vectors = eigh(part.bath_block[:n_pig, :n_pig])
    labels_by_energy = np.arange(n_pig) if rate_order == "ascending" else np.arange(n_pig)[::-1]
    pig_rates = pigment_rates[labels_by_energy]

    values = np.concatenate([pig_values, [part.bath_block[-1, -1]]])
    vectors = np.zeros((n_bath, n_bath))
    vectors[:n_pig, :n_pig] = pig_vectors
    vectors[-1, -1] = 1.0
    all_rates = np.concatenate([pig_rates, [sink_rate]])
    all_labels = np.concatenate([labels_by_energy + 3, [n_bath + 2]])

    order = np.argsort(values, kind="stable")
    values = values[order]
    vectors = vectors[:, order]
    all_rates = all_rates[order]
    all_labels = all_labels[order]
    sink_position = int(np.flatnonzero(order == n_bath - 1)[0])

    weights_donor = (vectors.T @ part.coupling_donor) ** 2
    weights_acceptor = (vectors.T @ part.coupling_acceptor) ** 2

    logger.debug("Bath eigenvalues %s, sink at slot %d", np.round(values, 3).tolist(), sink_position)
    return BathSpectrum(
        eigenvalues=values,
        eigenvectors=vectors,
        rates=all_rates,
        weights_donor=weights_donor,
        weights_acceptor=weights_acceptor,
        sink_position=sink_position,
        rate_order=rate_order,
        labels=tuple(int(a) for a in all_labels),
    )


def shift_energies(net: ExcitonNetwork, delta: float) -> ExcitonNetwork:
    """Add a constant to every site energy (global gauge shift)"""
    matrix = np.array(net.hamiltonian) + delta * np.eye(net.n_sites)
    return ExcitonNetwork(hamiltonian=matrix, label=net.label, site_labels=net.site_labels)
