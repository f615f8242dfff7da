from .models import Order, OrderLine, Product, StockLevel
from .storage import ProductCatalog, StockLedger

__all__ = ["Order", "OrderLine", "Product", "StockLevel", "ProductCatalog", "StockLedger"]
