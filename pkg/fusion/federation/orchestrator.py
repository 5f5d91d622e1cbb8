"""
In-process driver of one protocol run over any transport.
"""

import logging
from concurrent.futures import ThreadPoolExecutor, wait

from fusion.config import EstimationConfig
from fusion.exceptions import ProtocolError
from fusion.federation.nodes import SourceNode, TargetNode

logger = logging.getLogger(__name__)


def _run_sites(executor, nodes, method, timeout, *args):
    """Run ``method`` on every node; return the ids of nodes that did not finish."""
    futures = {executor.submit(getattr(node, method), *args): node for node in nodes}
    done, pending = wait(futures, timeout=timeout)
    failed = [futures[future].site_id for future in pending]
    for future in done:
        error = future.exception()
        if error is not None:
            logger.error(f"Site {futures[future].site_id} failed in {method}: {error}")
            failed.append(futures[future].site_id)
    return failed


def orchestrate(transport, target, sources, config=None, estimator="eco_ate"):
    """Run the two rounds: uplink 1, broadcast, uplink 2, fuse.

    Source computations of each round run concurrently; the target collects with a
    zero wait once every source has finished or the round timeout has passed.

    Parameters
    ----------
    transport : BaseTransport
        Channel shared by every site
    target : SiteDataset
        Target records
    sources : list
        ``(SiteDataset, BasisVector or None)`` per source
    config : EstimationConfig, optional
        Protocol-wide settings; ``round_timeout`` bounds each round

    Returns
    -------
    EstimateReport
        Fused estimate; the message transcript stays on the transport

    Raises
    ------
    ProtocolError
        On duplicate site ids
    SiteTimeoutError
        When a source is missing under the ``abort`` policy
    """
    config = config or EstimationConfig.from_settings()
    nodes = [SourceNode(data, basis, transport, config) for data, basis in sources]
    site_ids = [target.site_id] + [node.site_id for node in nodes]
    if len(set(site_ids)) != len(site_ids):
        raise ProtocolError(f"Duplicate site ids {site_ids}")
    target_node = TargetNode(target, transport, config)
    source_ids = site_ids[1:]
    timeout = config.round_timeout

    with ThreadPoolExecutor(max_workers=max(len(nodes), 1) + 1) as executor:
        _run_sites(executor, nodes, "run_round1", timeout)
        round1 = target_node.collect_round1(source_ids, timeout=0)
        target_node.broadcast(round1)

        sizes = target_node.package.site_sizes
        included = [node for node in nodes if node.site_id in sizes]
        target_future = executor.submit(target_node.run_round2)
        _run_sites(executor, included, "run_round2", timeout, target.site_id)
        target_future.result()
        report = target_node.fuse(timeout=0, estimator=estimator)

    logger.info(f"Protocol finished with {len(transport.transcript)} messages: {report}")
    return report
