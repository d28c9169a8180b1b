"""Exception types raised across the package."""


class EmofuseError(Exception):
    """Base class for all package errors."""


# --- dataset / manifest ---

class MissingFile(EmofuseError):
    pass


class MalformedRecord(EmofuseError):
    def __init__(self, line_no: int, reason: str):
        super().__init__(f"manifest line {line_no}: {reason}")
        self.line_no = line_no
        self.reason = reason


class UnknownLabel(EmofuseError):
    def __init__(self, value: str):
        super().__init__(f"unknown label {value!r}")
        self.value = value


class DuplicateId(EmofuseError):
    def __init__(self, sample_id: str):
        super().__init__(f"duplicate sample id {sample_id!r}")
        self.sample_id = sample_id


class TooFewSamples(EmofuseError):
    pass


class EmptyResult(EmofuseError):
    pass


class SessionCountMismatch(EmofuseError):
    def __init__(self, found: int, expected: int):
        super().__init__(f"found {found} sessions, expected {expected}")
        self.found = found
        self.expected = expected


# --- audio ---

class EmptyAudio(EmofuseError):
    pass


class NonFiniteSample(EmofuseError):
    pass


class SilentSignal(EmofuseError):
    pass


class OutOfRangeShift(EmofuseError):
    pass


class OutOfRangeRate(EmofuseError):
    pass


class UnsupportedAudio(EmofuseError):
    pass


# --- text / providers ---

class ProviderUnavailable(EmofuseError):
    pass


class TranscriptionFailed(EmofuseError):
    def __init__(self, audio_ref: str, reason: str = ""):
        msg = f"transcription failed for {audio_ref!r}"
        if reason:
            msg += f": {reason}"
        super().__init__(msg)
        self.audio_ref = audio_ref


class EmptyText(EmofuseError):
    pass


# --- model / tensors ---

class ShapeMismatch(EmofuseError):
    pass


class AllKeysMasked(EmofuseError):
    pass


class EmptyInput(EmofuseError):
    pass


class DimensionMismatch(EmofuseError):
    pass


# --- losses ---

class BatchTooSmall(EmofuseError):
    pass


class NoPositivesAnywhere(EmofuseError):
    pass


class DropoutDisabled(EmofuseError):
    pass


class NonFiniteInput(EmofuseError):
    pass


# --- metrics ---

class LengthMismatch(EmofuseError):
    pass


class LabelOutOfRange(EmofuseError):
    pass


# --- training ---

class NonFiniteLoss(EmofuseError):
    def __init__(self, step: int, detail: str = ""):
        msg = f"non-finite loss at step {step}"
        if detail:
            msg += f" ({detail})"
        super().__init__(msg)
        self.step = step


class EmptyEvalSet(EmofuseError):
    pass


class IncompatibleCheckpoint(EmofuseError):
    pass
