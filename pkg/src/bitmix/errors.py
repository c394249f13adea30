"""Exception hierarchy. Everything raised on bad input derives from BitMixError."""


class BitMixError(ValueError):
    pass


# image_core
class MalformedHeader(BitMixError):
    pass


class TruncatedData(BitMixError):
    pass


class UnsupportedMaxval(BitMixError):
    pass


class DimensionMismatch(BitMixError):
    pass


# stego_sim
class OutOfRange(BitMixError):
    pass


class DegenerateOutput(BitMixError):
    """Embedding modified no pixel; re-seed and try again."""


class FlatImage(BitMixError):
    """Cover has zero local variance everywhere, so no adaptive map exists."""


# augment
class ZeroDenominator(BitMixError):
    """Cover and stego are identical, so the modified-pixel ratio is undefined."""


class BoxOutOfBounds(BitMixError):
    pass


class EmptyBatch(BitMixError):
    pass


# stats
class SingleClass(BitMixError):
    pass


class NoSamplesInBand(BitMixError):
    def __init__(self, message: str, attempts: int = 0):
        super().__init__(message)
        self.attempts = attempts


# batch_io
class BadMagic(BitMixError):
    pass


class UnsupportedVersion(BitMixError):
    pass


class Truncated(BitMixError):
    pass


class LabelOutOfRange(BitMixError):
    pass


class MalformedContainer(BitMixError):
    pass


class MixedPixelKinds(BitMixError):
    pass
