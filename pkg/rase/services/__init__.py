"""模拟服务"""
