"""Exception hierarchy shared by all shredkit modules."""


class ShredkitError(Exception):
    """Base class for domain failures (CLI exit code 1)."""


# tokens
class MissingStart(ShredkitError):
    pass


class UnknownString(ShredkitError):
    pass


class PitchOutOfRange(ShredkitError):
    pass


# musicology
class EmptyTimeline(ShredkitError):
    pass


class NoPitchedEvents(ShredkitError):
    pass


class EmptyHistogram(ShredkitError):
    pass


# stats
class BothEmpty(ShredkitError):
    pass


class DegenerateInput(ShredkitError):
    pass


class EmptyInput(ShredkitError):
    pass


# corpus
class EmptyCorpus(ShredkitError):
    pass


class InvalidArtistName(ShredkitError):
    pass


class MeasureOutOfRange(ShredkitError):
    pass


class NoMeasureTokens(ShredkitError):
    pass


class TooFewSongs(ShredkitError):
    pass


# stylelm
class UnknownArtist(ShredkitError):
    pass


class TooShort(ShredkitError):
    pass


# classify
class SingleClass(ShredkitError):
    pass


class EmptyAfterFiltering(ShredkitError):
    pass


class EmptyConfiguration(ShredkitError):
    pass
