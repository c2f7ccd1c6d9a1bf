def oldest_water_node(en):
    qual = en.getComputedQualityTimeSeries()
    column = int(qual.NodeQuality[-1, :].argmax())
    return en.getNodeNameID(column + 1)

result = oldest_water_node(en)
