"""
Main entry point of the TSN scheduling service
This script imports and runs the FastAPI app from src/api/app.py
"""
import os
import sys
import uvicorn

# Add the project root to the Python path
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

from src.utils.config import get_settings

if __name__ == "__main__":
    settings = get_settings()
    try:
        uvicorn.run("src.api.app:app", host=settings.api_host, port=settings.api_port, reload=False)
    except KeyboardInterrupt:
        print("Server stopped by user")
    except Exception as e:
        print(f"Server error: {e}")
