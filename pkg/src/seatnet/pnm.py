"""Binary PNM codec: PGM (P5, grayscale) and PPM (P6, RGB), 8-bit only.

Decoding returns float32 (channels, height, width) with values in [0, 1]
(byte / 255). The header parser accepts arbitrary whitespace and '#'
comments between tokens, per the PNM convention.
"""

import numpy as np

from seatnet.errors import PnmHeaderError, PnmMaxvalError, PnmTruncatedError


def _tokens(data, count, start):
    """Yield `count` header tokens after `start`, skipping comments."""
    pos = start
    out = []
    while len(out) < count:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if pos < len(data) and data[pos : pos + 1] == b"#":
            eol = data.find(b"\n", pos)
            if eol < 0:
                raise PnmHeaderError("unterminated comment in header")
            pos = eol + 1
            continue
        end = pos
        while end < len(data) and not data[end : end + 1].isspace():
            end += 1
        if end == pos:
            raise PnmHeaderError("header ended before width/height/maxval")
        out.append(data[pos:end])
        pos = end
    return out, pos


def decode_pnm_bytes(data):
    if len(data) < 2:
        raise PnmHeaderError("file too short for a PNM magic number")
    magic = data[:2]
    if magic == b"P5":
        channels = 1
    elif magic == b"P6":
        channels = 3
    else:
        raise PnmHeaderError(f"unsupported magic {magic!r} (only binary P5/P6)")
    tokens, pos = _tokens(data, 3, 2)
    try:
        width, height, maxval = (int(t) for t in tokens)
    except ValueError:
        raise PnmHeaderError(f"non-numeric header tokens {tokens!r}") from None
    if width < 1 or height < 1:
        raise PnmHeaderError(f"bad dimensions {width}x{height}")
    if maxval != 255:
        raise PnmMaxvalError(f"maxval {maxval} unsupported (only 8-bit, 255)")
    pos += 1  # single whitespace byte separating header from payload
    need = width * height * channels
    payload = data[pos : pos + need]
    if len(payload) < need:
        raise PnmTruncatedError(
            f"payload has {len(payload)} bytes, header promises {need}"
        )
    img = np.frombuffer(payload, dtype=np.uint8).astype(np.float32) / np.float32(255.0)
    if channels == 1:
        return img.reshape(1, height, width)
    return img.reshape(height, width, 3).transpose(2, 0, 1).copy()


def decode_pnm(path):
    """Decode a PGM/PPM file to float32 (C, H, W) in [0, 1]."""
    with open(path, "rb") as fh:
        return decode_pnm_bytes(fh.read())


def encode_pgm(img_u8):
    """Encode a uint8 (H, W) array as binary PGM bytes."""
    h, w = img_u8.shape
    return b"P5\n%d %d\n255\n" % (w, h) + img_u8.tobytes()


def write_pgm(path, img_u8):
    with open(path, "wb") as fh:
        fh.write(encode_pgm(np.ascontiguousarray(img_u8, dtype=np.uint8)))
