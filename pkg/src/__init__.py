"""Visual and memory dual adapter tracker."""

__version__ = "0.1.0"
