def count_junctions(en):
    return en.getNodeJunctionCount()

result = count_junctions(en)
