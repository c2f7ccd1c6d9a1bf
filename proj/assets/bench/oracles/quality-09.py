def old_water_nodes(en):
    qual = en.getComputedQualityTimeSeries()
    return int((qual.NodeQuality[-1, :] > 48).sum())

result = old_water_nodes(en)
