def average_final_age(en):
    qual = en.getComputedQualityTimeSeries()
    return float(qual.NodeQuality[-1, :].mean())

result = average_final_age(en)
