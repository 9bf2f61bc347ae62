import hashlib
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import FrozenSet, Optional, Tuple

from errors import ConfigError

logger = logging.getLogger(__name__)

DEFAULT_MAP_PATH = Path(__file__).parent / "maps" / "taxi_18x13.txt"

# Landmark glyphs in index order
LANDMARK_GLYPHS = "RGYBCM"
OPEN_GLYPH = ":"
WALL_GLYPH = "|"
CELL_GLYPHS = " " + LANDMARK_GLYPHS

Cell = Tuple[int, int]


@dataclass(frozen=True)
class TaxiWorld:
    """Static Taxi map: grid size, walls between cells and landmark cells."""
    width: int
    height: int
    walls: FrozenSet[Tuple[Cell, Cell]]
    landmarks: Tuple[Cell, ...]
    map_hash: str

    def blocked(self, cell: Cell, target: Cell) -> bool:
        """True if moving from ``cell`` to ``target`` hits a wall or the border."""
        row, col = target
        if not (0 <= row < self.height and 0 <= col < self.width):
            return True
        return (cell, target) in self.walls or (target, cell) in self.walls


class TaxiMapLoader:
    """Handles loading and parsing of the plain-text Taxi map."""

    def __init__(self, map_path: Optional[str] = None):
        self.map_path = Path(map_path) if map_path else DEFAULT_MAP_PATH

    def load_world(self) -> TaxiWorld:
        """
        Parse the map file.

        Returns:
            The parsed TaxiWorld

        Raises:
            ConfigError: if the file is missing or malformed (with line/column)
        """
        if not self.map_path.exists():
            raise ConfigError(f"Taxi map file not found: {self.map_path}")

        text = self.map_path.read_text(encoding="utf-8")
        world = self.parse(text, source=str(self.map_path))
        logger.info(
            f"Loaded {world.width}x{world.height} Taxi map with "
            f"{len(world.landmarks)} landmarks and {len(world.walls)} inner walls"
        )
        return world

    @staticmethod
    def parse(text: str, source: str = "<map>") -> TaxiWorld:
        numbered = [
            (number, line.rstrip("\n"))
            for number, line in enumerate(text.splitlines(), start=1)
            if line.strip() and not line.lstrip().startswith("#")
        ]
        if len(numbered) < 3:
            raise ConfigError(f"{source}: map needs a top border, at least one row and a bottom border")

        top_number, top = numbered[0]
        bottom_number, bottom = numbered[-1]
        _check_border(top, top_number, source)
        _check_border(bottom, bottom_number, source)
        if len(bottom) != len(top):
            raise ConfigError(f"{source}:{bottom_number}:1: bottom border length differs from top border")

        line_length = len(top)
        if line_length < 3 or line_length % 2 == 0:
            raise ConfigError(f"{source}:{top_number}:1: border length {line_length} cannot describe whole cells")
        width = (line_length - 1) // 2

        walls = set()
        landmarks = {}
        rows = numbered[1:-1]
        for row, (number, line) in enumerate(rows):
            if len(line) != line_length:
                raise ConfigError(
                    f"{source}:{number}:{min(len(line), line_length) + 1}: "
                    f"expected {line_length} characters, found {len(line)}"
                )
            if line[0] != WALL_GLYPH:
                raise ConfigError(f"{source}:{number}:1: row must start with '{WALL_GLYPH}'")
            for col in range(width):
                glyph = line[1 + 2 * col]
                if glyph not in CELL_GLYPHS:
                    raise ConfigError(f"{source}:{number}:{2 + 2 * col}: unknown cell glyph {glyph!r}")
                if glyph in LANDMARK_GLYPHS:
                    if glyph in landmarks:
                        raise ConfigError(f"{source}:{number}:{2 + 2 * col}: landmark {glyph!r} defined twice")
                    landmarks[glyph] = (row, col)

                separator = line[2 + 2 * col]
                if col == width - 1:
                    if separator != WALL_GLYPH:
                        raise ConfigError(f"{source}:{number}:{3 + 2 * col}: row must end with '{WALL_GLYPH}'")
                elif separator == WALL_GLYPH:
                    walls.add(((row, col), (row, col + 1)))
                elif separator != OPEN_GLYPH:
                    raise ConfigError(f"{source}:{number}:{3 + 2 * col}: unknown separator glyph {separator!r}")

        if len(landmarks) < 4:
            raise ConfigError(f"{source}: at least 4 landmarks are required, found {len(landmarks)}")
        ordered = tuple(landmarks[glyph] for glyph in LANDMARK_GLYPHS if glyph in landmarks)

        map_hash = hashlib.sha256("\n".join(line for _, line in numbered).encode("utf-8")).hexdigest()
        return TaxiWorld(
            width=width,
            height=len(rows),
            walls=frozenset(walls),
            landmarks=ordered,
            map_hash=map_hash,
        )


def _check_border(line: str, number: int, source: str) -> None:
    if len(line) < 2 or line[0] != "+" or line[-1] != "+":
        raise ConfigError(f"{source}:{number}:1: border line must start and end with '+'")
    for offset, glyph in enumerate(line[1:-1], start=2):
        if glyph != "-":
            raise ConfigError(f"{source}:{number}:{offset}: unexpected glyph {glyph!r} in border")
