#!/usr/bin/env python
"""Точка входа командной строки: обучение, оценка и рецепты экспериментов."""
import sys


def main():
    """Run experiment commands."""
    try:
        from harness.cli import main as cli_main
    except ImportError as exc:
        raise ImportError(
            "Couldn't import harness. Are the requirements installed and "
            "is the project root on your PYTHONPATH environment variable?"
        ) from exc
    return cli_main(sys.argv[1:])


if __name__ == "__main__":
    sys.exit(main())
