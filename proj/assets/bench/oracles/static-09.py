def count_reservoirs(en):
    return en.getNodeReservoirCount()

result = count_reservoirs(en)
