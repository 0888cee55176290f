"""HTTP service wrapping the package; the ASGI app is ``sfqecc.service.app:app``."""
