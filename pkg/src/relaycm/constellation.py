"""QAM constellations, bit labelings, and per-level symbol partitions.

Symbol indexing is row-major over the I/Q grid: the imaginary level sweeps
slowest from most negative upward, the real level fastest.  Labels are bit
vectors with bit level 1 as the most significant bit.

16QAM applies an independent Gray code on each axis (amplitude levels
-3,-1,+1,+3 map to 00,01,11,10), so bits 1-2 select the real level and
bits 3-4 the imaginary level.  Bit level 1 is then the sign of the real
part, which several tests rely on.

32QAM is the 6x6 cross with the four corners removed.  No perfect Gray
map exists for a cross; the labeling used here folds the four two-point
wings onto the short sides of a virtual 8x4 rectangle and Gray-codes that
rectangle per axis (3 bits horizontal, 2 bits vertical).  The resulting
table is quasi-Gray, balanced on every bit level, and is also shipped as
a plain-text data file so downstream results stay reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from importlib import resources

import numpy as np

from .errors import ConfigError

QAM16 = "qam16"
QAM32 = "qam32"
GRAY = "gray"
GMI32 = "gmi32"

ENERGY_TOL = 1e-12

# Reflected binary sequences for 4 and 8 levels.
_GRAY4 = (0, 1, 3, 2)
_GRAY8 = (0, 1, 3, 2, 6, 7, 5, 4)

# Wing fold for the 32-cross: (re_level, im_level) on the 6x6 grid -> (u, v)
# on the 8x4 rectangle.  Inner points use u = re_level + 1, v = im_level - 1.
_CROSS_WING = {
    (1, 0): (0, 0), (2, 0): (0, 1), (2, 5): (0, 2), (1, 5): (0, 3),
    (4, 0): (7, 0), (3, 0): (7, 1), (3, 5): (7, 2), (4, 5): (7, 3),
}


@dataclass(eq=False)
class Constellation:
    """A complex symbol set with a fixed bit labeling.

    Treated as immutable after construction.  ``symbols[i]`` is the point
    for integer index ``i`` and ``labels[i]`` its bit pattern, most
    significant bit first.
    """

    name: str
    symbols: np.ndarray          # (M,) complex128, unit mean energy
    labels: np.ndarray           # (M, m) uint8
    _lut: np.ndarray | None = field(default=None, repr=False)

    @property
    def order(self) -> int:
        return len(self.symbols)

    @property
    def bits_per_symbol(self) -> int:
        return self.labels.shape[1]

    def label_ints(self) -> np.ndarray:
        """Labels packed into integers, bit level 1 as the MSB."""
        m = self.bits_per_symbol
        weights = 1 << np.arange(m - 1, -1, -1)
        return (self.labels.astype(np.int64) * weights).sum(axis=1)

    def index_of_label(self) -> np.ndarray:
        """Lookup table from packed label to symbol index (-1 where unused)."""
        if self._lut is None:
            lut = np.full(1 << self.bits_per_symbol, -1, dtype=np.int64)
            lut[self.label_ints()] = np.arange(self.order)
            self._lut = lut
        return self._lut

    def mean_energy(self) -> float:
        return float(np.mean(np.abs(self.symbols) ** 2))

    def validate(self) -> None:
        m = self.bits_per_symbol
        if self.order != 1 << m:
            raise ConfigError(f"order {self.order} does not match {m} bits per symbol")
        if abs(self.mean_energy() - 1.0) > ENERGY_TOL:
            raise ConfigError(f"mean symbol energy {self.mean_energy()!r} is not 1")
        ints = self.label_ints()
        if len(np.unique(ints)) != self.order:
            raise ConfigError("bit labels are not distinct")

    def to_table(self) -> str:
        """Plain-text table: one row per symbol with index, Re, Im, label.

        Floats are written with repr so a parse round trip is bit exact.
        """
        m = self.bits_per_symbol
        lines = [
            f"# constellation: {self.name}",
            f"# order: {self.order}",
            "# columns: index re im label",
        ]
        for i in range(self.order):
            bits = "".join(str(b) for b in self.labels[i])
            lines.append(
                f"{i} {float(self.symbols[i].real)!r} {float(self.symbols[i].imag)!r} {bits}"
            )
        return "\n".join(lines) + "\n"

    @classmethod
    def from_table(cls, text: str) -> "Constellation":
        name = "imported"
        rows = []
        for raw in text.splitlines():
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                if line.startswith("# constellation:"):
                    name = line.split(":", 1)[1].strip()
                continue
            parts = line.split()
            if len(parts) != 4:
                raise ConfigError(f"malformed constellation row: {raw!r}")
            rows.append((int(parts[0]), float(parts[1]), float(parts[2]), parts[3]))
        if not rows:
            raise ConfigError("empty constellation table")
        rows.sort(key=lambda r: r[0])
        if [r[0] for r in rows] != list(range(len(rows))):
            raise ConfigError("constellation indices are not 0..M-1")
        m = len(rows[0][3])
        symbols = np.array([complex(re, im) for _, re, im, _ in rows])
        labels = np.array([[int(ch) for ch in bits] for _, _, _, bits in rows], dtype=np.uint8)
        if labels.shape[1] != m or not set("".join(r[3] for r in rows)) <= {"0", "1"}:
            raise ConfigError("malformed bit labels")
        return cls(name=name, symbols=symbols, labels=labels)


@dataclass(eq=False)
class BitLevelSets:
    """Index sets splitting the constellation by the value of each bit level.

    ``zero[i]`` holds the symbol indices whose bit level ``i`` (0-based
    here) is 0, ``one[i]`` the complement.
    """

    zero: list
    one: list

    @property
    def levels(self) -> int:
        return len(self.zero)


def _int_to_bits(value: int, width: int) -> list:
    return [(value >> (width - 1 - k)) & 1 for k in range(width)]


def _build_qam16() -> Constellation:
    levels = np.array([-3.0, -1.0, 1.0, 3.0]) / np.sqrt(10.0)
    symbols = np.empty(16, dtype=complex)
    labels = np.empty((16, 4), dtype=np.uint8)
    for row in range(4):          # imaginary level, most negative first
        for col in range(4):      # real level
            i = row * 4 + col
            symbols[i] = levels[col] + 1j * levels[row]
            labels[i] = _int_to_bits(_GRAY4[col], 2) + _int_to_bits(_GRAY4[row], 2)
    return Constellation(name="qam16-gray", symbols=symbols, labels=labels)


def _build_qam32() -> Constellation:
    levels = np.array([-5.0, -3.0, -1.0, 1.0, 3.0, 5.0]) / np.sqrt(20.0)
    points = []
    for row in range(6):
        for col in range(6):
            if row in (0, 5) and col in (0, 5):
                continue
            points.append((row, col))
    symbols = np.empty(32, dtype=complex)
    labels = np.empty((32, 5), dtype=np.uint8)
    for i, (row, col) in enumerate(points):
        symbols[i] = levels[col] + 1j * levels[row]
        if 1 <= row <= 4:
            u, v = col + 1, row - 1
        else:
            u, v = _CROSS_WING[(col, row)]
        labels[i] = _int_to_bits(_GRAY8[u], 3) + _int_to_bits(_GRAY4[v], 2)
    return Constellation(name="qam32-gmi32", symbols=symbols, labels=labels)


def build_constellation(fmt: str = QAM16, mapping: str | None = None) -> Constellation:
    """Construct one of the supported constellation/labeling pairs.

    Parameters
    ----------
    fmt : "qam16" or "qam32"
    mapping : labeling name; defaults to the only mapping shipped for the
        format ("gray" for 16QAM, "gmi32" for the 32 cross).
    """
    fmt = str(fmt).lower()
    if fmt == QAM16:
        mapping = GRAY if mapping is None else str(mapping).lower()
        if mapping != GRAY:
            raise ConfigError(f"16QAM supports only the {GRAY!r} mapping, got {mapping!r}")
        c = _build_qam16()
    elif fmt == QAM32:
        mapping = GMI32 if mapping is None else str(mapping).lower()
        if mapping != GMI32:
            raise ConfigError(f"32QAM supports only the {GMI32!r} mapping, got {mapping!r}")
        c = _build_qam32()
    else:
        raise ConfigError(f"unknown constellation format {fmt!r}")
    c.validate()
    return c


def bit_level_sets(c: Constellation) -> BitLevelSets:
    """Partition symbol indices by the value at each bit level."""
    zero, one = [], []
    for i in range(c.bits_per_symbol):
        zero.append(np.flatnonzero(c.labels[:, i] == 0))
        one.append(np.flatnonzero(c.labels[:, i] == 1))
    return BitLevelSets(zero=zero, one=one)


def indices_for_bits(c: Constellation, bits) -> np.ndarray:
    """Map a flat bit stream onto symbol indices, bit level 1 first.

    The stream length must be a multiple of bits_per_symbol; unused label
    patterns (possible only if the labeling is partial) are rejected.
    """
    b = np.asarray(bits, dtype=np.int64).ravel()
    m = c.bits_per_symbol
    if len(b) % m:
        raise ConfigError(f"bit stream length {len(b)} is not a multiple of {m}")
    weights = 1 << np.arange(m - 1, -1, -1)
    idx = c.index_of_label()[b.reshape(-1, m) @ weights]
    if np.any(idx < 0):
        raise ConfigError("bit pattern has no symbol under this labeling")
    return idx


def bits_for_indices(c: Constellation, idx) -> np.ndarray:
    """Flatten the labels of the given symbol indices back to a bit stream."""
    return c.labels[np.asarray(idx, dtype=np.int64)].ravel()


def packaged_table(name: str) -> str:
    """Return the text of one of the constellation tables shipped in the repo."""
    return resources.files("relaycm.data").joinpath(name).read_text()
