"""Exception hierarchy shared across the engine.

Every error a caller is expected to branch on gets its own class (or a stable
``code`` attribute for the weight-file checks) so the CLI can map failures to
its exit-code contract.
"""


class SeatnetError(Exception):
    """Base class for all errors raised by this package."""


class ShapeError(SeatnetError):
    """Two tensor dimensions that must agree do not.

    The message always names the operation and both offending dimensions.
    """

    def __init__(self, op, detail):
        self.op = op
        super().__init__(f"{op}: {detail}")


class ConfigError(SeatnetError):
    """A hyperparameter or model-configuration value is out of range."""


class DataError(SeatnetError):
    """Manifest, label, or image-decoding problem. Carries file/row context."""


class ManifestError(DataError):
    """A manifest CSV row failed validation; names the row number."""

    def __init__(self, row, detail):
        self.row = row
        super().__init__(f"manifest row {row}: {detail}")


class PnmError(DataError):
    """Base for PNM (PGM/PPM) decoding failures."""


class PnmHeaderError(PnmError):
    """Malformed or unsupported PNM header."""


class PnmTruncatedError(PnmError):
    """Pixel payload shorter than the header promises."""


class PnmMaxvalError(PnmError):
    """Maxval other than 255 (only 8-bit images are supported)."""


class WeightFormatError(SeatnetError):
    """SWT weight-file validation failure with a machine-checkable code.

    Codes: bad_magic, bad_version, truncated, bad_checksum, bad_dtype,
    unknown_tensor, missing_tensor, shape_mismatch, name_set_mismatch.
    """

    def __init__(self, code, detail):
        self.code = code
        super().__init__(f"{code}: {detail}")


class NameSetError(SeatnetError):
    """Two weight stores that must share a name set do not (snapshot/restore)."""


class TrainingDivergedError(SeatnetError):
    """Non-finite training loss; aborts rather than skipping the batch."""

    def __init__(self, epoch, batch, value):
        self.epoch = epoch
        self.batch = batch
        self.value = value
        super().__init__(
            f"non-finite loss {value!r} at epoch {epoch}, batch {batch}"
        )
