class TracelabError(Exception):
    pass


class InfeasibleError(TracelabError):
    """A declared size cap would be exceeded (exit code 1 at the CLI)."""
