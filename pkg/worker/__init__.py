# Worker package
