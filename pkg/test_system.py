"""
Smoke tests for the FMO resonance toolkit

Runs under pytest, or standalone with `python test_system.py` for a quick check
of a fresh install.
"""
import sys
import tempfile
from pathlib import Path

sys.path.append('.')

DATASET = Path(__file__).parent / 'data' / 'fmo_adolphs_renger.json'


def test_configuration():
    """Settings load and carry the published optimum"""
    print("🧪 Testing configuration...")
    from config import settings
    assert settings.OPTIMUM_SINK_COUPLING == 327.0
    assert settings.QUAD_ABS_TOL <= 1e-4
    print(f"✅ Config loaded - rate order: {settings.RATE_ORDER}, seed: {settings.SEED}")


def test_data_loading():
    """Bundled Hamiltonian loads and validates"""
    print("🧪 Testing data loading...")
    from src.network_model import load_network
    net = load_network(DATASET)
    assert net.n_sites == 8
    print(f"✅ Network loaded - {net.label}: {net.n_pigments} pigments + sink")


def test_overlap_pipeline():
    """𝓕 at the published parameters"""
    print("🧪 Testing overlap pipeline...")
    from src.network_model import SinkParameters, load_network
    from src.optimize import optimum_rates, run_pipeline
    result = run_pipeline(load_network(DATASET), optimum_rates(), SinkParameters())
    assert 0.72 <= result.overlap <= 0.78
    print(f"✅ Overlap efficiency 𝓕 = {result.overlap:.4f}")


def test_bounce_efficiency():
    """η(5) for p = 0.5, q = 10⁻³"""
    print("🧪 Testing bounce efficiency...")
    from src.transfer import BounceParameters, bounce_efficiency
    eta = bounce_efficiency(BounceParameters(p=0.5, q=1e-3, n=5))
    assert abs(eta - 0.9662) < 1e-4
    print(f"✅ η(5) = {eta:.4f}")


def test_command_line():
    """`bounce` subcommand end to end"""
    print("🧪 Testing command line...")
    from fmo_resonance import EXIT_OK, run_command
    with tempfile.TemporaryDirectory() as out:
        code = run_command(['bounce', '--p', '0.5', '--q', '0.001', '--n', '5', '--output-dir', out])
        assert code == EXIT_OK
        assert (Path(out) / 'bounce.json').exists()
    print("✅ Command line OK")


def main():
    """Run all tests"""
    print("🚀 Running FMO Resonance Toolkit Tests\n")

    tests = [
        test_configuration,
        test_data_loading,
        test_overlap_pipeline,
        test_bounce_efficiency,
        test_command_line,
    ]

    results = []
    for test in tests:
        try:
            test()
            results.append(True)
        except Exception as e:
            print(f"❌ {test.__name__} failed: {e}")
            results.append(False)
        print()

    passed = sum(results)
    total = len(results)

    print("📊 Test Summary:")
    print(f"✅ Passed: {passed}/{total}")
    print(f"❌ Failed: {total - passed}/{total}")

    if passed == total:
        print("🎉 All tests passed! Toolkit ready to use.")
    else:
        print("⚠️ Some tests failed. Check the output above.")

    return passed == total


if __name__ == "__main__":
    sys.exit(0 if main() else 1)
