"""From-scratch numpy network: CNNBlock, aggregator, loss, optimizer and training."""
