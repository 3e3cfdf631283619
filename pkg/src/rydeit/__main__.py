"""Allow `python -m rydeit` to behave like the `rydeit` console script."""

from .cli import main

if __name__ == "__main__":
    raise SystemExit(main())
