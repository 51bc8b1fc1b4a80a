"""Dense numeric kernels used by the adapters."""
