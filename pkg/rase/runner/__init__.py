"""实验注册与运行"""
