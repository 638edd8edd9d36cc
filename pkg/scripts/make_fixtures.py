#!/usr/bin/env python3
"""Regenerate the committed .dat-s fixtures from the gallery."""

import os
import sys

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from gapscope.gallery import gallery_names, get_entry   # noqa: E402
from gapscope.sdpa import write_sdpa                    # noqa: E402


def main():
    out = os.path.join(os.path.dirname(__file__), "..", "tests", "fixtures")
    os.makedirs(out, exist_ok=True)
    for name in gallery_names():
        path = os.path.join(out, f"{name}.dat-s")
        write_sdpa(get_entry(name).instance, path)
        print("wrote", path)


if __name__ == "__main__":
    main()
