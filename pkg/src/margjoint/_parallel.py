from concurrent.futures import ProcessPoolExecutor


def ordered_map(func, items, workers: int = 1) -> list:
    """``[func(i) for i in items]``, optionally spread over worker processes.

    Output order always follows ``items``; ``func`` must be picklable.
    """
    items = list(items)
    if workers <= 1 or len(items) <= 1:
        return [func(item) for item in items]
    chunk = max(1, len(items) // (4 * workers))
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(func, items, chunksize=chunk))
