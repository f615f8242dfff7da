import logging
from typing import Dict, List, Optional

from .models import Order, StockLevel
from .storage import StockLedger, StorageError

log = logging.getLogger(__name__)


class AllocationError(Exception):
    def __init__(self, sku: str, missing: int):
        super().__init__(f"cannot allocate {missing} units of {sku}")
        self.sku = sku
        self.missing = missing


def allocate_line(ledger: StockLedger, sku: str, quantity: int) -> Dict[str, int]:
    plan: Dict[str, int] = {}
    remaining = quantity
    for warehouse in ledger.warehouses_for(sku):
        level = ledger.level(sku, warehouse)
        take = min(level.available, remaining)
        if take and level.reserve(take):
            plan[warehouse] = take
            remaining -= take
        if remaining == 0:
            break
    if remaining:
        rollback(ledger, sku, plan)
        raise AllocationError(sku, remaining)
    return plan


def rollback(ledger: StockLedger, sku: str, plan: Dict[str, int]) -> None:
    for warehouse, amount in plan.items():
        ledger.level(sku, warehouse).release(amount)


class Fulfiller:
    def __init__(self, ledger: StockLedger):
        self.ledger = ledger
        self.allocations: Dict[str, Dict[str, Dict[str, int]]] = {}

    def allocate(self, order: Order) -> bool:
        done: Dict[str, Dict[str, int]] = {}
        try:
            for sku, quantity in order.quantities().items():
                done[sku] = allocate_line(self.ledger, sku, quantity)
        except AllocationError as err:
            log.warning("order %s blocked: %s", order.order_id, err)
            for sku, plan in done.items():
                rollback(self.ledger, sku, plan)
            return False
        self.allocations[order.order_id] = done
        return True

    def cancel(self, order_id: str) -> Optional[int]:
        plan = self.allocations.pop(order_id, None)
        if plan is None:
            return None
        released = 0
        for sku, per_warehouse in plan.items():
            rollback(self.ledger, sku, per_warehouse)
            released += sum(per_warehouse.values())
        return released

    def pending(self) -> List[str]:
        return sorted(self.allocations)
