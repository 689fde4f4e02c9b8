class ConfigError(ValueError):
    """Invalid scenario or model configuration."""


class ScenarioParseError(ConfigError):
    """Scenario text could not be parsed; carries the source location."""

    def __init__(self, message, line=None, column=None, source=None):
        self.line = line
        self.column = column
        self.source = source
        where = ""
        if line is not None:
            where = f"line {line}, column {column}: " if column is not None else f"line {line}: "
        prefix = f"{source}: " if source else ""
        super().__init__(f"{prefix}{where}{message}")


class SimulationFault(RuntimeError):
    """An automaton received an event that is not enabled in its current mode.

    This always indicates a wiring bug in the engine, never bad input.
    """

    def __init__(self, message, timestamp=None, module=None):
        self.timestamp = timestamp
        self.module = module
        ctx = []
        if module:
            ctx.append(module)
        if timestamp is not None:
            ctx.append(f"t={timestamp:g} ms")
        suffix = f" [{', '.join(ctx)}]" if ctx else ""
        super().__init__(message + suffix)
