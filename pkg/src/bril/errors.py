class ContractError(ValueError):
    """A caller violated an operation's precondition."""
