"""
In-memory cache for propagation kernels (OTF phases, lens phases, chirps).
Implements LRU eviction with hit statistics.
"""

import threading
from typing import Callable, Dict, Hashable, Tuple

import numpy as np
from cachetools import LRUCache

from config.settings import settings
from src.utils.logging_config import logger


class KernelCache:
    """Manages memoized kernel arrays with LRU eviction."""

    def __init__(self, max_entries: int = None):
        """
        Initialize kernel cache.

        Args:
            max_entries: Maximum number of cached kernels (LRU eviction)
        """
        self.max_entries = max_entries or settings.kernel_cache_size
        self._cache = LRUCache(maxsize=self.max_entries)
        self._lock = threading.Lock()
        self._hits: Dict[str, int] = {}
        self._misses = 0
        logger.debug(f"Kernel cache initialized with {self.max_entries} entries")

    @staticmethod
    def _generate_cache_key(kind: str, params: Tuple[Hashable, ...]) -> Tuple:
        # Floats are rounded so that equal distances computed by different
        # arithmetic paths share one entry
        normalized = tuple(
            round(p, 15) if isinstance(p, float) else p for p in params
        )
        return (kind,) + normalized

    def get_or_compute(
        self,
        kind: str,
        params: Tuple[Hashable, ...],
        builder: Callable[[], np.ndarray]
    ) -> np.ndarray:
        """
        Get a cached kernel or build and store it.

        Args:
            kind: Kernel family name (e.g. 'otf', 'lens')
            params: Hashable parameters identifying the kernel
            builder: Zero-argument callable producing the kernel

        Returns:
            Read-only kernel array
        """
        key = self._generate_cache_key(kind, params)

        with self._lock:
            kernel = self._cache.get(key)
            if kernel is not None:
                self._hits[kind] = self._hits.get(kind, 0) + 1
                return kernel

        kernel = np.asarray(builder())
        kernel.setflags(write=False)

        with self._lock:
            self._misses += 1
            self._cache[key] = kernel

        logger.debug(f"Cached {kind} kernel {params}")
        return kernel

    def clear_all(self):
        """Clear all cache entries."""
        with self._lock:
            deleted = len(self._cache)
            self._cache.clear()
            self._hits.clear()
            self._misses = 0
        logger.info(f"Cleared all {deleted} kernel cache entries")

    def get_stats(self) -> dict:
        """
        Get cache statistics.

        Returns:
            Dictionary with cache stats
        """
        with self._lock:
            return {
                "total_entries": len(self._cache),
                "max_entries": self.max_entries,
                "total_hits": sum(self._hits.values()),
                "total_misses": self._misses,
                "hits_by_kind": dict(self._hits)
            }


# Global kernel cache instance
_kernel_cache = None


def get_kernel_cache() -> KernelCache:
    """Get or create global kernel cache instance."""
    global _kernel_cache
    if _kernel_cache is None:
        _kernel_cache = KernelCache()
    return _kernel_cache
