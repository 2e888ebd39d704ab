"""Drive the command line front end from Python and show its reproducibility."""

import io

from kkflat.cli import main


def run(*argv):
    out, err = io.StringIO(), io.StringIO()
    code = main(list(argv), stdout=out, stderr=err)
    return code, out.getvalue(), err.getvalue()


scan = ("scan", "--solution", "dilaton_2d", "--param", "model=I2", "--param", "Y=0.5:2:3",
        "--param", "M=0", "--seed", "3", "--format", "csv")
code, first, _ = run(*scan)
_, second, _ = run(*scan)
print(first)
print(f"exit code {code}, identical on rerun: {first == second}")

for argv in (("verify", "--solution", "sol2_static"),
             ("verify", "--solution", "sol2_static", "--param", "perturb=0.01"),
             ("verify", "--solution", "nope")):
    code, _, err = run(*argv)
    print(f"{' '.join(argv):60s} -> exit {code} {err.strip()[:60]}")
