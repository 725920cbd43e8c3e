"""
Exception hierarchy shared by the solvers, the network layer and the CLI.

Every error carries a short ``kind`` tag and the process exit status the
command-line runner should return for it:

    2  validation errors (bad input, invalid network, out-of-range data)
    3  model-regime errors (congested demand, infeasible flux, unsupported slope)
    4  internal consistency errors
"""


class LwrNetError(Exception):
    """Base class of all errors raised by the package."""

    kind = "internal"
    exit_code = 4

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.message = message
        self.diagnostics = list(diagnostics or [])

    def record(self):
        """
        Renders the error as a single machine-parsable line.

        Returns:
            str: ``error kind=<kind> code=<n> message="<text>"``.
        """
        text = self.message.replace("\\", "\\\\").replace('"', '\\"')
        text = " ".join(text.split())
        return f'error kind={self.kind} code={self.exit_code} message="{text}"'


class ValidationError(LwrNetError):
    kind = "validation"
    exit_code = 2


class FluxDomainError(ValidationError):
    """A density or state outside the flux's domain."""

    kind = "flux_domain"


class FluxModelError(ValidationError):
    """A velocity law that violates the model assumptions."""

    kind = "flux_model"


class FreeRegimeError(ValidationError):
    """Data above the critical density where the free regime is required."""

    kind = "free_regime"


class TraceKindError(ValidationError):
    kind = "trace_kind"


class NetworkError(ValidationError):
    """Raised with the full list of topology violations."""

    kind = "network"


class RegimeError(LwrNetError):
    kind = "regime"
    exit_code = 3


class InfeasibleFluxError(RegimeError):
    """A flow above the road capacity was requested."""

    kind = "infeasible_flux"


class CongestionError(RegimeError):
    """Junction demand exceeds what the outgoing road can take in the free regime."""

    kind = "congestion"


class UnsupportedRegimeError(RegimeError):
    kind = "unsupported_regime"


class ConsistencyError(LwrNetError):
    kind = "consistency"
    exit_code = 4


class CouplingError(ConsistencyError):
    """Two solutions that must share a grid and a time axis do not."""

    kind = "coupling"
