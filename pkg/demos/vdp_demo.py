#!/usr/bin/env python3
"""
Van der Pol demo: fit a SILL model on [-3, 3]^2, predict three trajectories
and report how the lifted prediction tracks the oscillation
"""

import sys
from pathlib import Path

# Add project root to path
project_root = Path(__file__).parent.parent
sys.path.append(str(project_root))

from config.config import GROWTH_WARNING_RATE, setup_logging  # noqa: E402
from koopman_sill.cli import run_demo  # noqa: E402
from koopman_sill.errors import SILLError  # noqa: E402

OUT_DIR = project_root / "data" / "vdp_demo"


def run_vdp_demo() -> bool:
    print("🚀 VAN DER POL DEMO")
    print("=" * 50)
    try:
        result = run_demo("vdp", OUT_DIR)
    except SILLError as e:
        print(f"❌ Demo failed: {e}")
        return False

    fit = result["fit"]
    print(f"📊 Dictionary: {fit.model.dictionary.n_centers} centers, lifting dimension {fit.model.generator.lifting_dim}")
    print(f"✅ Regression relative L2 error: {', '.join(f'{e:.3%}' for e in fit.report.rel_l2_error)}")
    abscissa = fit.model.generator.spectral_abscissa
    if abscissa > GROWTH_WARNING_RATE:
        print(f"⚠️  Generator has growing modes (max Re eigenvalue {abscissa:.2f}); predictions will drift")

    print("\n🔍 Trajectories:")
    for outcome in result["outcomes"]:
        reference = outcome.reference.states
        amplitude = float((reference ** 2).sum(axis=1).mean() ** 0.5)
        ratio = outcome.comparison.rmse / amplitude if amplitude > 0 else float("inf")
        inside = fit.model.dictionary.contains(outcome.x0)
        print(f"   x0={outcome.x0.tolist()}: RMSE {outcome.comparison.rmse:.4f} "
              f"({ratio:.1%} of amplitude){'' if inside else '  [outside the lattice]'}")

    print(f"\n✅ Demo completed successfully! Outputs in {OUT_DIR}")
    print("💡 Plot predicted_*.csv columns x1,x2 against xhat1,xhat2 to compare the orbits")
    return True


if __name__ == "__main__":
    setup_logging()
    sys.exit(0 if run_vdp_demo() else 1)
