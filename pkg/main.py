"""Check the numerical stack and print the active settings."""

import numpy as np
import pydantic
import scipy

from app.config import settings
from app.exponents import exponent_report
from app.operator import frac_constant


def main() -> None:
    print(f"numpy {np.__version__}, scipy {scipy.__version__}, pydantic {pydantic.VERSION}")
    print(f"Settings: {settings.model_dump()}")

    # Smoke values with known closed forms
    report = exponent_report(3, 0.5, 2.0)
    print(f"d=3, s=0.5, p=2: p_F = {report.p_F:g}, p_crit = {report.p_crit:g}")
    print(f"C(1, 0.5) = {frac_constant(1, 0.5).value:.12g} (1/pi = {1 / np.pi:.12g})")
    print("Done.")


if __name__ == "__main__":
    main()
