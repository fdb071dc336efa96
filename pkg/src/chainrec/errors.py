"""Error types shared across the package.

Every error carries a short machine-readable code so the CLI can emit
structured error JSON without string matching on messages.
"""


class ChainrecError(Exception):
    code = "error"

    def __init__(self, message):
        super().__init__(message)
        self.message = message

    def to_json(self):
        return {"error": {"code": self.code, "message": self.message}}


class InvalidSpace(ChainrecError):
    code = "invalid-space"


class InvalidDiscretization(ChainrecError):
    code = "invalid-discretization"


class InvalidPoint(ChainrecError):
    code = "invalid-point"


class InvalidPerturbation(ChainrecError):
    code = "invalid-perturbation"


class PerturbationDegenerate(ChainrecError):
    code = "perturbation-degenerate"


class MismatchedComplexes(ChainrecError):
    code = "mismatched-complexes"


class DegenerateCover(ChainrecError):
    code = "degenerate-cover"


class NotApplicable(ChainrecError):
    code = "not-applicable"


class ConfigError(ChainrecError):
    code = "config-error"


class InternalInvariantError(ChainrecError):
    code = "internal-error"
