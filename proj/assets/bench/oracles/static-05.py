def tank_ids(en):
    return list(en.getNodeTankNameID())

result = tank_ids(en)
