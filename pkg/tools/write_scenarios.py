"""Regenerate the annotated scenario files under scenarios/ from the built-ins."""

from pathlib import Path

from micromorph import config
from micromorph.scenarios import ALIASES, BUILTINS, builtin

OUT = Path(__file__).resolve().parent.parent / "scenarios"


def header(name: str) -> str:
    alias = {v: k for k, v in ALIASES.items()}.get(name)
    tag = f" (alias '{alias}')" if alias else ""
    return (
        f"Built-in scenario '{name}'{tag}, written out as a scenario file.\n"
        f"Run it with:  micromorph run --scenario scenarios/{name}.yaml\n"
        "Regenerate with:  python3 tools/write_scenarios.py\n"
    )


def main() -> None:
    OUT.mkdir(exist_ok=True)
    for name in BUILTINS:
        config.dump(builtin(name), OUT / f"{name}.yaml", header=header(name))
        print(OUT / f"{name}.yaml")


if __name__ == "__main__":
    main()
