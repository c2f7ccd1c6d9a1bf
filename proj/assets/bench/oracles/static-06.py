def node_elevation(en):
    return float(en.getNodeElevations(en.getNodeIndex("22")))

result = node_elevation(en)
