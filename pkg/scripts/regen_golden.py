"""Rewrite tests/data and tests/golden from the current code.

Run after an intentional change to a report format, then review the diff.
"""

import contextlib
import io
import os
import shutil
import sys
import tempfile

sys.path.insert(0, os.path.join(os.path.dirname(os.path.abspath(__file__)), "..", "tests"))

from cli_cases import CASES, GOLDEN, extra_outputs, resolve, write_inputs  # noqa: E402

from robust_ftap.cli import main  # noqa: E402


def run(argv, outdir):
    buf = io.StringIO()
    with contextlib.redirect_stdout(buf):
        code = main(resolve(argv, outdir))
    return code, buf.getvalue()


if __name__ == "__main__":
    write_inputs()
    os.makedirs(GOLDEN, exist_ok=True)
    with tempfile.TemporaryDirectory() as tmp:
        for name, argv, expected in CASES:
            code, text = run(argv, tmp)
            with open(os.path.join(GOLDEN, name + ".json"), "w", encoding="utf-8") as fh:
                fh.write(text)
            for extra in extra_outputs(argv):
                shutil.copy(os.path.join(tmp, extra), os.path.join(GOLDEN, f"{name}.{extra}"))
            flag = "" if expected is None or code == expected else f"  (expected {expected})"
            print(f"{name}: exit {code}{flag}")
