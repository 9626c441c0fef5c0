"""Exception hierarchy shared across the simulator."""


class MarsimError(Exception):
    """Base class for all marsim errors."""


class OutOfRange(MarsimError):
    """Input outside the validity range of an approximation."""


class ParseError(MarsimError):
    """Malformed input file."""


class IrregularGrid(ParseError):
    """XYZ point cloud does not form a regular grid."""


class OutOfBounds(MarsimError):
    """Spatial query outside the data hull."""


class NoData(MarsimError):
    """Query hit a nodata cell."""


class SchemaError(MarsimError):
    """Document fails schema validation; message carries the field path."""

    def __init__(self, path: str, detail: str):
        self.path = path
        self.detail = detail
        super().__init__(f"{path}: {detail}")


class ModelInvalid(MarsimError):
    """Vehicle model violates a physical invariant (e.g. non-PD mass matrix)."""


class MissingAsset(MarsimError):
    """A file referenced by a scenario does not exist."""


class UnknownActuator(MarsimError):
    """Command addressed to an actuator the vehicle does not have."""


class DeflectionOutOfRange(MarsimError):
    """Control surface deflection beyond its mechanical limit."""


class ThrustOutOfRange(MarsimError):
    """Thrust magnitude beyond the thruster's rating."""


class NumericalBlowup(MarsimError):
    """State diverged; usually a misconfigured model or too large dt."""

    def __init__(self, vehicle_id: str, tick: int):
        self.vehicle_id = vehicle_id
        self.tick = tick
        super().__init__(f"state blew up for vehicle '{vehicle_id}' at tick {tick}")


class ClockRegression(MarsimError):
    """Poll time went backwards."""


class VersionMismatch(MarsimError):
    """Snapshot produced by an incompatible schema version."""


class DegenerateLeg(MarsimError):
    """Guidance leg with coincident endpoints."""


class SpacingTooLarge(MarsimError):
    """Survey track spacing exceeds the area width."""


class DtMismatch(MarsimError):
    """Trajectory log sample period is not an integer multiple of the sim dt."""


class TooFewSamples(MarsimError):
    """Not enough samples for finite differencing or fitting."""


class FeatureMismatch(MarsimError):
    """Residual model feature layout does not match the vehicle's actuators."""


class EpisodeFinished(MarsimError):
    """step() called on an episode that already terminated."""


class NoTelemetryYet(MarsimError):
    """Ghost requested for a vehicle with no received telemetry."""


class NotExternallyDriven(MarsimError):
    """State injection targeted a vehicle the simulation owns."""


class AuthFailure(MarsimError):
    """Shared-token authentication failed."""


class BindError(MarsimError):
    """Network service could not bind its address."""
