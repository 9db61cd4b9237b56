# Copyright 2026 The gpa Authors
# SPDX-License-Identifier: Apache-2.0
import sys

from . import cli


def main() -> int:
    return cli(sys.argv[1:])


if __name__ == "__main__":
    sys.exit(main())
