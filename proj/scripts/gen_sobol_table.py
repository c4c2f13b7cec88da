"""Regenerate src/sobol_direction_numbers.inc from the Joe-Kuo table shipped with SciPy."""
import os

import numpy as np
import scipy

DIMS = 1024


def main():
    table = np.load(os.path.join(os.path.dirname(scipy.__file__), "stats", "_sobol_direction_numbers.npz"))
    poly, vinit = table["poly"][:DIMS], table["vinit"][:DIMS]
    out = [
        "// Sobol direction numbers for the first %d dimensions." % DIMS,
        "// Primitive polynomials and initial direction numbers from S. Joe and F. Y. Kuo,",
        "// \"Constructing Sobol sequences with better two-dimensional projections\" (new-joe-kuo-6.21201).",
        "// Each polynomial includes its leading and trailing coefficients.",
        "// Generated by scripts/gen_sobol_table.py; do not edit.",
        "",
        "inline constexpr std::size_t kSobolMaxDim = %d;" % DIMS,
        "inline constexpr std::size_t kSobolMaxDegree = 18;",
        "",
        "inline constexpr std::uint32_t kSobolPoly[kSobolMaxDim] = {",
    ]
    for i in range(0, DIMS, 12):
        out.append("    " + ", ".join(str(int(x)) for x in poly[i:i + 12]) + ",")
    out += ["};", "", "inline constexpr std::uint32_t kSobolInit[kSobolMaxDim][kSobolMaxDegree] = {"]
    for row in vinit:
        out.append("    {" + ", ".join(str(int(x)) for x in row) + "},")
    out.append("};")
    path = os.path.join(os.path.dirname(__file__), "..", "src", "sobol_direction_numbers.inc")
    with open(path, "w") as fh:
        fh.write("\n".join(out) + "\n")


if __name__ == "__main__":
    main()
