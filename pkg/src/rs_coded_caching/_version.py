from importlib.metadata import PackageNotFoundError, version

try:
    __version__ = version("rs-coded-caching")
except PackageNotFoundError:
    __version__ = "uninstalled"
