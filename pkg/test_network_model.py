"""
Tests for the exciton network model: loading, constraints, partition and bath spectrum
"""
import json
from pathlib import Path

import numpy as np
import pytest

from src.errors import FormatError, ParameterError, ValidationError
from src.network_model import (ExcitonNetwork, SinkParameters, diagonalize_bath, load_network,
                               partition, shift_energies, validate_constraints)

DATASET = Path(__file__).parent / "data" / "fmo_adolphs_renger.json"
OPTIMUM_RATES = [59.6, 90.0, 50.3, 59.7, 89.7]


@pytest.fixture(scope="module")
def fmo():
    return load_network(DATASET)


@pytest.fixture(scope="module")
def document():
    return json.loads(DATASET.read_text())


def _toy_matrix():
    """Donor, acceptor, two bath pigments and a sink"""
    return np.array([
        [10.0, 0.0, 5.0, 2.0, 0.0],
        [0.0, 0.0, 3.0, 4.0, 0.0],
        [5.0, 3.0, 50.0, 1.0, 0.0],
        [2.0, 4.0, 1.0, 80.0, 0.0],
        [0.0, 0.0, 0.0, 0.0, -100.0],
    ])


def test_bundled_network_loads(fmo):
    assert fmo.n_sites == 8
    assert fmo.n_pigments == 7
    assert fmo.sink_index == 7
    assert fmo.site_labels[:2] == ("BChl1", "BChl3")
    report = validate_constraints(fmo)
    assert report.is_valid
    assert report.summary() == "constraints satisfied"


def test_hamiltonian_is_read_only(fmo):
    with pytest.raises(ValueError):
        fmo.hamiltonian[0, 0] = 1.0


def test_missing_sink_column(document):
    broken = dict(document)
    broken["hamiltonian"] = [row[:-1] for row in document["hamiltonian"][:-1]]
    with pytest.raises(FormatError, match="missing sink column"):
        load_network(broken)


def test_non_square_matrix_rejected(document):
    broken = dict(document)
    broken["hamiltonian"] = [row[:-1] for row in document["hamiltonian"]]
    with pytest.raises(FormatError):
        load_network(broken)


def test_complex_entries_rejected():
    matrix = _toy_matrix().tolist()
    matrix[2][3] = complex(1.0, 0.5)
    with pytest.raises(FormatError):
        load_network({"n_pigments": 4, "hamiltonian": matrix})
    with pytest.raises(FormatError):
        ExcitonNetwork(_toy_matrix() + 0j)


def test_malformed_json(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text("{ not json")
    with pytest.raises(FormatError):
        load_network(path)


def test_donor_acceptor_coupling_is_a_violation(document):
    broken = dict(document)
    matrix = [list(row) for row in document["hamiltonian"]]
    matrix[0][1] = matrix[1][0] = 5.5
    broken["hamiltonian"] = matrix
    with pytest.raises(ValidationError) as info:
        load_network(broken)
    kinds = [v.kind for v in info.value.report.violations]
    assert kinds == ["donor-acceptor"]
    assert info.value.report.violations[0].sites == (1, 2)


def test_bath_pigment_sink_coupling_is_a_violation():
    matrix = _toy_matrix()
    matrix[2, 4] = matrix[4, 2] = 7.0
    report = validate_constraints(ExcitonNetwork(matrix))
    assert not report.is_valid
    assert [(v.kind, v.sites) for v in report.violations] == [("sink-coupling", (3, 5))]


def test_acceptor_sink_entry_is_allowed():
    matrix = _toy_matrix()
    matrix[1, 4] = matrix[4, 1] = 30.0
    assert validate_constraints(ExcitonNetwork(matrix)).is_valid


def test_asymmetry_reported():
    matrix = _toy_matrix()
    matrix[2, 3] = 1.5
    report = validate_constraints(ExcitonNetwork(matrix))
    assert [v.kind for v in report.violations] == ["symmetry"]
    assert "H[3][4]" in report.summary()


def test_too_small_network():
    report = validate_constraints(ExcitonNetwork(np.zeros((3, 3))))
    assert "size" in [v.kind for v in report.violations]


def test_sink_parameters_validation():
    with pytest.raises(ValueError):
        SinkParameters(sink_rate=0.0)
    with pytest.raises(ValueError):
        SinkParameters(acceptor_sink_coupling=-1.0)
    sink = SinkParameters()
    assert (sink.sink_energy, sink.acceptor_sink_coupling, sink.sink_rate) == (-500.0, 327.0, 50.1)


def test_partition_of_bundled_network(fmo):
    part = partition(fmo, SinkParameters())
    assert part.n_bath == 6
    assert part.donor_energy == 200.0
    assert part.acceptor_energy == 0.0
    assert part.bath_block[-1, -1] == -500.0
    assert np.all(part.bath_block[-1, :-1] == 0.0)
    assert part.coupling_donor[-1] == 0.0
    assert part.coupling_acceptor[-1] == 327.0
    np.testing.assert_array_equal(part.coupling_donor[:-1], [-87.7, -5.9, 6.7, -13.7, -9.9])
    np.testing.assert_array_equal(part.coupling_acceptor[:-1], [30.8, -53.5, -2.2, -9.6, 6.0])


def test_partition_refuses_invalid_network():
    matrix = _toy_matrix()
    matrix[0, 1] = matrix[1, 0] = 1.0
    with pytest.raises(ValidationError):
        partition(ExcitonNetwork(matrix), SinkParameters())


def test_bath_spectrum_reconstructs_block(fmo):
    part = partition(fmo, SinkParameters())
    spectrum = diagonalize_bath(part, OPTIMUM_RATES)
    np.testing.assert_allclose(spectrum.reconstruct(), part.bath_block, atol=1e-10)
    assert np.all(np.diff(spectrum.eigenvalues) >= 0)
    np.testing.assert_allclose(spectrum.eigenvectors.T @ spectrum.eigenvectors, np.eye(6), atol=1e-12)


def test_pigment_eigenvalues(fmo):
    spectrum = diagonalize_bath(partition(fmo, SinkParameters()), OPTIMUM_RATES)
    pigments = np.delete(spectrum.eigenvalues, spectrum.sink_position)
    np.testing.assert_allclose(pigments, [59.97, 243.61, 255.99, 320.44, 470.00], atol=0.05)


def test_sink_pinned_by_eigenvector(fmo):
    spectrum = diagonalize_bath(partition(fmo, SinkParameters()), OPTIMUM_RATES)
    k = spectrum.sink_position
    assert k == 0
    assert spectrum.eigenvalues[k] == -500.0
    assert spectrum.rates[k] == 50.1
    assert spectrum.labels[k] == 8
    assert spectrum.weights_donor[k] == 0.0
    assert spectrum.weights_acceptor[k] == pytest.approx(327.0 ** 2, rel=1e-14)


def test_sink_above_the_band_keeps_its_rate(fmo):
    sink = SinkParameters(sink_energy=1000.0, sink_rate=70.0)
    spectrum = diagonalize_bath(partition(fmo, sink), OPTIMUM_RATES)
    assert spectrum.sink_position == 5
    assert spectrum.rates[5] == 70.0
    assert spectrum.labels[5] == 8


def test_descending_rate_order(fmo):
    spectrum = diagonalize_bath(partition(fmo, SinkParameters()), OPTIMUM_RATES, "descending")
    np.testing.assert_array_equal(spectrum.rates, [50.1, 89.7, 59.7, 50.3, 90.0, 59.6])
    assert spectrum.labels == (8, 7, 6, 5, 4, 3)


def test_ascending_rate_order(fmo):
    spectrum = diagonalize_bath(partition(fmo, SinkParameters()), OPTIMUM_RATES, "ascending")
    np.testing.assert_array_equal(spectrum.rates, [50.1, 59.6, 90.0, 50.3, 59.7, 89.7])
    assert spectrum.labels == (8, 3, 4, 5, 6, 7)


def test_explicit_sink_rate_overrides_parameters(fmo):
    spectrum = diagonalize_bath(partition(fmo, SinkParameters()), OPTIMUM_RATES + [65.0])
    assert spectrum.rates[spectrum.sink_position] == 65.0


def test_weights_add_up_to_coupling_norm(fmo):
    part = partition(fmo, SinkParameters())
    spectrum = diagonalize_bath(part, OPTIMUM_RATES)
    assert spectrum.weights_donor.sum() == pytest.approx(np.sum(part.coupling_donor ** 2), rel=1e-12)
    assert spectrum.weights_acceptor.sum() == pytest.approx(np.sum(part.coupling_acceptor ** 2), rel=1e-12)
    assert np.all(spectrum.weights(0) >= 0) and np.all(spectrum.weights(1) >= 0)


def test_rate_errors(fmo):
    part = partition(fmo, SinkParameters())
    with pytest.raises(ParameterError):
        diagonalize_bath(part, OPTIMUM_RATES[:-1])
    with pytest.raises(ParameterError):
        diagonalize_bath(part, [59.6, 90.0, 0.0, 59.7, 89.7])
    with pytest.raises(ParameterError):
        diagonalize_bath(part, OPTIMUM_RATES, "random")


def test_shift_energies_moves_only_the_diagonal(fmo):
    shifted = shift_energies(fmo, 1000.0)
    difference = shifted.hamiltonian - fmo.hamiltonian
    np.testing.assert_allclose(difference, 1000.0 * np.eye(8), atol=1e-12)
    assert validate_constraints(shifted).is_valid
