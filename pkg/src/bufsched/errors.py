class ValidationError(ValueError):
    """Input violates a documented precondition."""


class CatalogError(KeyError):
    """A relation or index id is not present in the catalog."""

    def __str__(self):
        return str(self.args[0]) if self.args else "unknown relation"


class GuardError(ValueError):
    """Refused because the request would be intractable (e.g. factorial search)."""
