pytest_plugins = ["crosspers.testing"]
