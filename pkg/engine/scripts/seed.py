"""
Write the demo project config used in the docs and the integration tests.
Run: python scripts/seed.py [OUT_PATH]
"""
import json
import math
import sys
from pathlib import Path

# Add parent directory to path to import app modules
sys.path.insert(0, str(Path(__file__).parent.parent))

from app.services.pipeline import validate_config


DEMO = {
    "plant": {"J_m": 1.0, "B_m": 6.0, "K_s": 500.0, "J_j": 0.15, "K_c": 300.0, "T": 0.002},
    "design": {
        "J_hat": 2.0,
        "B_hat": 20.0,
        "alpha": 8.0,
        "zeta": 1.0,
        "zeta_hat": 0.8,
        "filter_omega": 2 * math.pi * 50,
        "filter_zeta": 0.7,
    },
    "dob": {"omega_q": 2 * math.pi * 20, "zeta_q": 0.7, "enabled": True},
    "sim": {
        "scenario": "locked-output",
        "dt_ctrl": 0.001,
        "substeps": 10,
        "duration": 8.0,
        "friction": {"F_c": 20.0, "v_eps": 0.01},
    },
    "human": {"kind": "spring", "K_h": 3000.0},
    "jacobian_table": [
        {"angle_rad": -1.0, "scale": 0.9},
        {"angle_rad": 0.0, "scale": 1.0},
        {"angle_rad": 1.0, "scale": 1.1},
    ],
}


def main() -> None:
    out = Path(sys.argv[1]) if len(sys.argv) > 1 else Path("demo_config.json")
    loaded = validate_config(DEMO)
    out.write_text(json.dumps(DEMO, indent=2) + "\n", encoding="utf-8")
    print(f"✓ Wrote demo config: {out}")
    print(f"  Digest: {loaded.digest[:12]}")
    for message in loaded.warnings:
        print(f"  Warning: {message}")


if __name__ == "__main__":
    main()
